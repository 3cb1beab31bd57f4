//! Scalar abstraction shared by the numeric kernels.
//!
//! Everything that is pure arithmetic (theory sums, the logistic fitter,
//! rank statistics, residual diagnostics) is written against [`Scalar`] so
//! it can run in `f32` or `f64`. Special functions that have no portable
//! generic implementation (`erfc`, log-binomials, incomplete gamma/beta)
//! are evaluated in `f64` and cast back.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or special-function result.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    fn half() -> Self {
        Self::of(0.5)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<S> {
    sum: S,
    carry: S,
}

impl<S: Scalar> CompensatedSum<S> {
    pub fn new() -> Self {
        Self { sum: S::zero(), carry: S::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: S) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> S {
        self.sum + self.carry
    }
}

impl<S: Scalar> FromIterator<S> for CompensatedSum<S> {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `e * ln(x)` with the `0 * ln(0) = 0` convention, so that `x^0 = 1` holds
/// at the boundary when exponentiated.
#[inline]
pub fn xlogy<S: Scalar>(e: S, x: S) -> S {
    if e == S::zero() {
        S::zero()
    } else {
        e * x.ln()
    }
}

const LOGIT_GUARD: f64 = 1e-300;

/// Log-odds of a probability, clamped away from 0 and 1.
pub fn logit<S: Scalar>(p: S) -> S {
    let guard = S::of(LOGIT_GUARD).max(S::min_positive_value());
    let p = p.max(guard).min(S::one() - S::epsilon() * S::half());
    (p / (S::one() - p)).ln()
}

/// Numerically stable logistic function.
pub fn inv_logit<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<S: Scalar>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Standard normal CDF via the complementary error function.
pub fn std_normal_cdf<S: Scalar>(x: S) -> S {
    S::of(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// Natural log of the binomial coefficient `C(n, k)`.
pub fn ln_binomial<S: Scalar>(n: usize, k: usize) -> S {
    S::of(statrs::function::factorial::ln_binomial(n as u64, k as u64))
}
