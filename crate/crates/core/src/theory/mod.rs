//! Stylized model of pruning repeated binary votes.
//!
//! Each of `n` (odd) repeats disagrees with the eventual majority with
//! probability `p`; a classifier prunes a disagreeing vote with probability
//! `q_t` and an agreeing vote with probability `q_f`. [`p_err`] gives the
//! exact probability that pruning flips the majority (ties and empty tasks
//! count as flips); [`p_err_oracle`] recomputes it by brute force.

mod curve;
mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{inv_logit, ln_binomial, logit, std_normal_cdf, xlogy, CompensatedSum, Scalar};

pub use curve::{accuracy_curve, read_curve_csv, write_curve_csv, ClassifierSource, CurveRow, CURVE_HEADER};
pub use oracle::{p_err_oracle, OracleEstimate, OracleMethod, MAX_ENUMERATION_N};

/// Largest repeat count accepted by the closed form.
pub const MAX_CLOSED_FORM_N: usize = 101;

/// True/false positive rates of a minority-report classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRates<S> {
    pub q_t: S,
    pub q_f: S,
}

impl<S: Scalar> ClassifierRates<S> {
    pub fn new(q_t: S, q_f: S) -> Result<Self> {
        let unit = |x: S| x >= S::zero() && x <= S::one();
        if !unit(q_t) || !unit(q_f) {
            return Err(Error::InvalidArgument(format!("rates must lie in [0, 1], got q_t={q_t}, q_f={q_f}")));
        }
        if q_f > q_t {
            return Err(Error::InvalidArgument(format!("false positive rate {q_f} exceeds true positive rate {q_t}")));
        }
        Ok(Self { q_t, q_f })
    }

    /// A classifier that prunes every vote with the same probability.
    pub fn random(q: S) -> Result<Self> {
        Self::new(q, q)
    }
}

/// Fixed repeat count `n` and per-vote disagreement probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConfig<S> {
    pub n: usize,
    pub p: S,
}

impl<S: Scalar> TheoryConfig<S> {
    pub fn new(n: usize, p: S) -> Result<Self> {
        if n.is_multiple_of(2) {
            return Err(Error::EvenRepeats(n));
        }
        if !(p >= S::zero() && p <= S::one()) {
            return Err(Error::InvalidArgument(format!("p must lie in [0, 1], got {p}")));
        }
        Ok(Self { n, p })
    }

    /// Smallest majority count, `floor(n/2) + 1`.
    pub fn min_majority(&self) -> usize {
        self.n / 2 + 1
    }
}

/// Classifier scores `x'λ` that are Gaussian given the class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianScoreModel<S> {
    pub mu1: S,
    pub mu0: S,
    pub sigma: S,
}

impl<S: Scalar> GaussianScoreModel<S> {
    pub fn new(mu1: S, mu0: S, sigma: S) -> Result<Self> {
        if !(mu1 > mu0) {
            return Err(Error::InvalidArgument(format!("need mu1 > mu0, got {mu1} <= {mu0}")));
        }
        if !(sigma > S::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { mu1, mu0, sigma })
    }

    /// Score-scale threshold that corresponds to a probability threshold.
    pub fn score_threshold(theta: S) -> Result<S> {
        if !(theta > S::zero() && theta < S::one()) {
            return Err(Error::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
        }
        Ok(logit(theta))
    }
}

#[inline]
fn binom_pmf<S: Scalar>(n: usize, k: usize, q: S) -> S {
    (ln_binomial::<S>(n, k) + xlogy(S::of_usize(k), q) + xlogy(S::of_usize(n - k), S::one() - q)).exp()
}

/// The three sums of the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PErrTerms<S> {
    /// Flip with at least one surviving disagreeing vote.
    pub s: S,
    /// Every vote pruned.
    pub t: S,
    /// Probability that the agreeing votes form a majority.
    pub c: S,
}

/// Evaluates the three sums in log space with compensated accumulation.
pub fn p_err_terms<S: Scalar>(cfg: &TheoryConfig<S>, rates: &ClassifierRates<S>) -> Result<PErrTerms<S>> {
    let n = cfg.n;
    if n.is_multiple_of(2) {
        return Err(Error::EvenRepeats(n));
    }
    if n > MAX_CLOSED_FORM_N {
        return Err(Error::InvalidArgument(format!("n = {n} exceeds the supported maximum {MAX_CLOSED_FORM_N}")));
    }
    let one = S::one();
    let (p, pb) = (cfg.p, one - cfg.p);
    let (qt, qtb) = (rates.q_t, one - rates.q_t);
    let (qf, qfb) = (rates.q_f, one - rates.q_f);
    let of = S::of_usize;
    let h = cfg.min_majority();

    let mut s = CompensatedSum::new();
    let mut t = CompensatedSum::new();
    let mut c = CompensatedSum::new();
    for k in h..=n {
        let m = n - k;
        let ln_g = ln_binomial::<S>(n, k) + xlogy(of(k), pb) + xlogy(of(m), p);
        c.add(ln_g.exp());
        t.add((ln_g + xlogy(of(m), qt) + xlogy(of(k), qf)).exp());
        if k == n {
            continue;
        }
        // i: pruned disagreeing votes (at least one disagreeing vote survives);
        // j: pruned agreeing votes, enough that agreeing survivors do not
        // outnumber disagreeing survivors.
        for i in 0..m {
            let ln_i = ln_g + ln_binomial::<S>(m, i) + xlogy(of(i), qt) + xlogy(of(m - i), qtb);
            for j in (2 * k - n + i)..=k {
                s.add((ln_i + ln_binomial::<S>(k, j) + xlogy(of(j), qf) + xlogy(of(k - j), qfb)).exp());
            }
        }
    }
    Ok(PErrTerms { s: s.total(), t: t.total(), c: c.total() })
}

/// Probability that the post-pruning majority differs from the unpruned one.
pub fn p_err<S: Scalar>(cfg: &TheoryConfig<S>, rates: &ClassifierRates<S>) -> Result<S> {
    let terms = p_err_terms(cfg, rates)?;
    if terms.c <= S::zero() {
        return Err(Error::InvalidArgument(format!("p = {} leaves no majority-forming outcome", cfg.p)));
    }
    Ok(((terms.s + terms.t) / terms.c).min(S::one()))
}

/// Expected fraction of votes pruned.
pub fn prune_rate<S: Scalar>(p: S, rates: &ClassifierRates<S>) -> S {
    p * rates.q_t + (S::one() - p) * rates.q_f
}

/// True/false positive rates induced by thresholding the Gaussian scores at
/// probability `theta`.
pub fn gaussian_rates<S: Scalar>(model: &GaussianScoreModel<S>, theta: S) -> Result<ClassifierRates<S>> {
    let cut = GaussianScoreModel::score_threshold(theta)?;
    // 1 - Φ(z) = Φ(-z) keeps the upper tail accurate
    let q_t = std_normal_cdf((model.mu1 - cut) / model.sigma);
    let q_f = std_normal_cdf((model.mu0 - cut) / model.sigma);
    Ok(ClassifierRates { q_t, q_f: q_f.min(q_t) })
}

/// Probability threshold whose score cut equals `score` (inverse of the
/// threshold map).
pub fn theta_for_score<S: Scalar>(score: S) -> S {
    inv_logit(score)
}

/// Area under the ROC curve of the Gaussian score model.
pub fn gaussian_auc<S: Scalar>(model: &GaussianScoreModel<S>) -> S {
    std_normal_cdf((model.mu1 - model.mu0) / (model.sigma * S::of(std::f64::consts::SQRT_2)))
}

/// `(β_k, γ_k)`: for `k` agreeing votes, the probability of a flip with a
/// surviving disagreeing vote and the probability that every vote is pruned,
/// both conditional on `K = k`.
pub fn beta_gamma<S: Scalar>(n: usize, k: usize, rates: &ClassifierRates<S>) -> Result<(S, S)> {
    let h = n / 2 + 1;
    if k < h || k > n {
        return Err(Error::InvalidArgument(format!("k = {k} outside [{h}, {n}]")));
    }
    let m = n - k;
    let gamma = (xlogy(S::of_usize(m), rates.q_t) + xlogy(S::of_usize(k), rates.q_f)).exp();
    let mut beta = CompensatedSum::new();
    for i in 0..m {
        let tp = binom_pmf(m, i, rates.q_t);
        let lo = (2 * k + i).saturating_sub(n);
        for j in lo..=k {
            beta.add(tp * binom_pmf(k, j, rates.q_f));
        }
    }
    Ok((beta.total(), gamma))
}
