//! Residual diagnostics for fitted minority-report models.

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

/// Durbin–Watson statistic of an ordered residual sequence, in `[0, 4]`.
pub fn durbin_watson<S: Scalar>(residuals: &[S]) -> Result<S> {
    if residuals.len() < 2 {
        return Err(Error::InvalidArgument("durbin_watson needs at least 2 residuals".into()));
    }
    let den: S = residuals.iter().map(|&e| e * e).collect::<CompensatedSum<S>>().total();
    if den == S::zero() {
        return Err(Error::DegenerateResiduals);
    }
    let num = residuals
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d * d
        })
        .collect::<CompensatedSum<S>>()
        .total();
    Ok(num / den)
}

/// Sum of squared deviance residuals per residual degree of freedom.
pub fn dispersion_ratio<S: Scalar>(deviance_residuals: &[S], residual_dof: usize) -> Result<S> {
    if residual_dof == 0 {
        return Err(Error::InvalidArgument("residual degrees of freedom must be at least 1".into()));
    }
    let ss = deviance_residuals.iter().map(|&e| e * e).collect::<CompensatedSum<S>>().total();
    Ok(ss / S::of_usize(residual_dof))
}

/// Signed deviance residual of a Bernoulli observation with fitted probability `p`.
pub fn deviance_residual<S: Scalar>(label: bool, p: S) -> S {
    let tiny = S::min_positive_value();
    if label {
        (S::of(-2.0) * p.max(tiny).ln()).sqrt()
    } else {
        -(S::of(-2.0) * (S::one() - p).max(tiny).ln()).sqrt()
    }
}
