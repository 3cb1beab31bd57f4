//! Brute-force checks of the closed form. Nothing here shares code with it:
//! the enumeration walks every joint (disagree?, pruned?) state of the `n`
//! votes, and the Monte-Carlo variant samples the same process.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ClassifierRates, TheoryConfig};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ENUMERATION_N: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    Enumerate,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate<S> {
    pub value: S,
    /// Zero for exact enumeration.
    pub std_error: S,
}

pub fn p_err_oracle<S: Scalar>(
    cfg: &TheoryConfig<S>,
    rates: &ClassifierRates<S>,
    method: OracleMethod,
) -> Result<OracleEstimate<S>> {
    if cfg.n.is_multiple_of(2) {
        return Err(Error::EvenRepeats(cfg.n));
    }
    match method {
        OracleMethod::Enumerate => {
            if cfg.n > MAX_ENUMERATION_N {
                return Err(Error::InvalidArgument(format!(
                    "enumeration supports n <= {MAX_ENUMERATION_N}, got {}",
                    cfg.n
                )));
            }
            enumerate(cfg, rates).map(|value| OracleEstimate { value, std_error: S::zero() })
        }
        OracleMethod::MonteCarlo { samples, seed } => monte_carlo(cfg, rates, samples, seed),
    }
}

fn powers<S: Scalar>(x: S, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = S::one();
    for _ in 0..=n {
        out.push(acc);
        acc *= x;
    }
    out
}

fn enumerate<S: Scalar>(cfg: &TheoryConfig<S>, rates: &ClassifierRates<S>) -> Result<S> {
    let n = cfg.n;
    let full: u32 = (1u32 << n) - 1;
    let one = S::one();
    let p_pow = powers(cfg.p, n);
    let pb_pow = powers(one - cfg.p, n);
    let qt_pow = powers(rates.q_t, n);
    let qtb_pow = powers(one - rates.q_t, n);
    let qf_pow = powers(rates.q_f, n);
    let qfb_pow = powers(one - rates.q_f, n);

    let mut flip_mass = 0.0f64;
    let mut flip_carry = 0.0f64;
    let mut cond_mass = 0.0f64;
    for minority in 0..=full {
        let dis = minority.count_ones() as usize;
        let agree = n - dis;
        if 2 * agree <= n {
            continue;
        }
        let state_p = p_pow[dis] * pb_pow[agree];
        cond_mass += state_p.as_f64();
        let majority = !minority & full;
        let mut inner = 0.0f64;
        for pruned in 0..=full {
            let tp = (minority & pruned).count_ones() as usize;
            let fp = (majority & pruned).count_ones() as usize;
            let dis_left = dis - tp;
            let agree_left = agree - fp;
            let flipped = (dis_left >= 1 && dis_left >= agree_left) || dis_left + agree_left == 0;
            if flipped {
                inner += (qt_pow[tp] * qtb_pow[dis_left] * qf_pow[fp] * qfb_pow[agree_left]).as_f64();
            }
        }
        // Neumaier step on the outer accumulation
        let term = state_p.as_f64() * inner;
        let t = flip_mass + term;
        if flip_mass.abs() >= term.abs() {
            flip_carry += (flip_mass - t) + term;
        } else {
            flip_carry += (term - t) + flip_mass;
        }
        flip_mass = t;
    }
    if cond_mass <= 0.0 {
        return Err(Error::InvalidArgument(format!("p = {} leaves no majority-forming outcome", cfg.p)));
    }
    Ok(S::of((flip_mass + flip_carry) / cond_mass))
}

fn monte_carlo<S: Scalar>(
    cfg: &TheoryConfig<S>,
    rates: &ClassifierRates<S>,
    samples: u64,
    seed: u64,
) -> Result<OracleEstimate<S>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("Monte-Carlo needs at least one sample".into()));
    }
    let n = cfg.n;
    let (p, qt, qf) = (cfg.p.as_f64(), rates.q_t.as_f64(), rates.q_f.as_f64());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = samples.saturating_mul(10_000);
    let mut attempts = 0u64;
    let mut flips = 0u64;
    let mut accepted = 0u64;
    while accepted < samples {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidArgument(format!("p = {p} almost never yields an agreeing majority")));
        }
        let dis = (0..n).filter(|_| rng.random_bool(p)).count();
        let agree = n - dis;
        if 2 * agree <= n {
            continue;
        }
        accepted += 1;
        let dis_left = (0..dis).filter(|_| !rng.random_bool(qt)).count();
        let agree_left = (0..agree).filter(|_| !rng.random_bool(qf)).count();
        if (dis_left >= 1 && dis_left >= agree_left) || dis_left + agree_left == 0 {
            flips += 1;
        }
    }
    let est = flips as f64 / samples as f64;
    let se = (est * (1.0 - est) / samples as f64).sqrt();
    Ok(OracleEstimate { value: S::of(est), std_error: S::of(se) })
}
