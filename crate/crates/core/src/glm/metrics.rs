use statrs::function::gamma::gamma_ur;

use super::FittedModel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Area under the ROC curve in Mann–Whitney form, ties counted one half.
pub fn auc<S: Scalar>(scores: &[S], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels("auc needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(std::cmp::Ordering::Equal));
    // Sum of midranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * idx[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// McFadden's pseudo-R².
pub fn pseudo_r2<S: Scalar>(model: &FittedModel<S>) -> Result<S> {
    let null = model.meta.null_log_likelihood;
    if null == S::zero() {
        return Err(Error::DegenerateLabels("null log-likelihood is zero".into()));
    }
    Ok(S::one() - model.meta.log_likelihood / null)
}

/// Likelihood-ratio statistic and chi-square upper-tail p-value.
pub fn likelihood_ratio_test<S: Scalar>(
    nested: &FittedModel<S>,
    full: &FittedModel<S>,
    dof_delta: usize,
) -> Result<(f64, f64)> {
    if dof_delta == 0 {
        return Err(Error::InvalidArgument("dof_delta must be at least 1".into()));
    }
    let ll_full = full.meta.log_likelihood.as_f64();
    let ll_nested = nested.meta.log_likelihood.as_f64();
    let slack = 1e-8 * (1.0 + ll_nested.abs());
    if ll_full < ll_nested - slack {
        return Err(Error::NonNestedFit { full: ll_full, nested: ll_nested });
    }
    let stat = (2.0 * (ll_full - ll_nested)).max(0.0);
    let p = if stat == 0.0 { 1.0 } else { gamma_ur(dof_delta as f64 / 2.0, stat / 2.0) };
    Ok((stat, p))
}
