use std::collections::BTreeMap;

use super::linalg::solve_spd;
use super::{DesignRow, FitMetadata, FittedModel, LabeledDesign, Layout};
use crate::error::{Error, Result};
use crate::scalar::{inv_logit, logit, softplus, xlogy, CompensatedSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    /// Convergence threshold on the largest coefficient change.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_halvings: 10 }
    }
}

/// Sparse view of one design row: at most seven nonzero columns.
struct RowCols<S> {
    cols: [(usize, S); 7],
    len: usize,
}

impl<S: Scalar> RowCols<S> {
    fn new(row: &DesignRow<S>, lay: &Layout) -> Self {
        let mut rc = Self { cols: [(0, S::zero()); 7], len: 0 };
        rc.push(0, S::one());
        if let Some(c) = lay.t {
            rc.push(c, row.t);
        }
        if let Some(c) = lay.t2 {
            rc.push(c, row.t * row.t);
        }
        for (block, idx) in
            [(lay.question, row.question), (lay.day, row.day), (lay.worker, row.worker), (lay.crop, row.crop)]
        {
            if let Some(i) = idx {
                rc.push(block.0 + i as usize, S::one());
            }
        }
        rc
    }

    fn push(&mut self, c: usize, v: S) {
        self.cols[self.len] = (c, v);
        self.len += 1;
    }

    fn iter(&self) -> impl Iterator<Item = &(usize, S)> {
        self.cols[..self.len].iter()
    }

    fn eta(&self, beta: &[S]) -> S {
        self.iter().fold(S::zero(), |acc, &(c, v)| acc + v * beta[c])
    }
}

fn penalties<S: Scalar>(design: &LabeledDesign<S>, lay: &Layout) -> Vec<S> {
    let mut pen = vec![S::zero(); lay.n_columns()];
    for (block, lambda) in [(lay.worker, design.spec.ridge_lambda_worker), (lay.crop, design.spec.ridge_lambda_crop)] {
        for p in &mut pen[block.0..block.0 + block.1] {
            *p = S::of(lambda.max(0.0));
        }
    }
    pen
}

fn objective_with<S: Scalar>(rows: &[RowCols<S>], design: &LabeledDesign<S>, pen: &[S], beta: &[S]) -> S {
    let mut acc = CompensatedSum::new();
    for (rc, row) in rows.iter().zip(&design.rows) {
        let eta = rc.eta(beta);
        let y = if row.label { eta } else { S::zero() };
        acc.add(row.weight * (y - softplus(eta)));
    }
    for (b, l) in beta.iter().zip(pen) {
        if *l > S::zero() {
            acc.add(-S::half() * *l * *b * *b);
        }
    }
    acc.total()
}

fn gradient_with<S: Scalar>(rows: &[RowCols<S>], design: &LabeledDesign<S>, pen: &[S], beta: &[S]) -> Vec<S> {
    let mut g = vec![S::zero(); beta.len()];
    for (rc, row) in rows.iter().zip(&design.rows) {
        let mu = inv_logit(rc.eta(beta));
        let y = if row.label { S::one() } else { S::zero() };
        let r = row.weight * (y - mu);
        for &(c, v) in rc.iter() {
            g[c] += r * v;
        }
    }
    for ((gi, b), l) in g.iter_mut().zip(beta).zip(pen) {
        *gi -= *l * *b;
    }
    g
}

fn sparse_rows<S: Scalar>(design: &LabeledDesign<S>) -> (Layout, Vec<RowCols<S>>) {
    let lay = design.layout();
    let rows = design.rows.iter().map(|r| RowCols::new(r, &lay)).collect();
    (lay, rows)
}

/// Weighted log-likelihood minus the ridge penalty, in the flat parameter
/// layout of [`LabeledDesign::layout`]. This is the quantity the fit maximizes.
pub fn penalized_objective<S: Scalar>(design: &LabeledDesign<S>, beta: &[S]) -> S {
    let (lay, rows) = sparse_rows(design);
    objective_with(&rows, design, &penalties(design, &lay), beta)
}

/// Analytic gradient of [`penalized_objective`].
pub fn penalized_gradient<S: Scalar>(design: &LabeledDesign<S>, beta: &[S]) -> Vec<S> {
    let (lay, rows) = sparse_rows(design);
    gradient_with(&rows, design, &penalties(design, &lay), beta)
}

/// Newton direction. The crop block of the Hessian is diagonal, so it is
/// eliminated through the Schur complement and only the dense block is
/// factorised.
fn newton_step<S: Scalar>(
    rows: &[RowCols<S>],
    design: &LabeledDesign<S>,
    lay: &Layout,
    pen: &[S],
    beta: &[S],
    grad: &[S],
) -> Option<Vec<S>> {
    let d = lay.n_dense();
    let nc = lay.crop.1;
    let mut a = vec![S::zero(); d * d];
    let mut b = vec![S::zero(); d * nc];
    let mut diag = vec![S::zero(); nc];
    for (rc, row) in rows.iter().zip(&design.rows) {
        let mu = inv_logit(rc.eta(beta));
        let h = row.weight * mu * (S::one() - mu);
        let crop = row.crop.map(|c| c as usize);
        for &(i, vi) in rc.iter() {
            if i >= d {
                continue;
            }
            for &(j, vj) in rc.iter() {
                if j < d {
                    a[i * d + j] += h * vi * vj;
                }
            }
            if let Some(c) = crop {
                b[i * nc + c] += h * vi;
            }
        }
        if let Some(c) = crop {
            diag[c] += h;
        }
    }
    for i in 0..d {
        a[i * d + i] += pen[i];
    }
    let floor = S::of(1e-12);
    for (c, v) in diag.iter_mut().enumerate() {
        *v = (*v + pen[d + c]).max(floor);
    }
    let (gd, gc) = grad.split_at(d);
    let mut rhs = gd.to_vec();
    for i in 0..d {
        for c in 0..nc {
            let bic = b[i * nc + c];
            if bic != S::zero() {
                rhs[i] -= bic * gc[c] / diag[c];
            }
        }
        for j in 0..=i {
            let mut s = S::zero();
            for c in 0..nc {
                s += b[i * nc + c] * b[j * nc + c] / diag[c];
            }
            a[i * d + j] -= s;
            if j != i {
                a[j * d + i] -= s;
            }
        }
    }
    let xd = solve_spd(&a, d, &rhs)?;
    let mut step = xd.clone();
    for c in 0..nc {
        let mut s = gc[c];
        for i in 0..d {
            s -= b[i * nc + c] * xd[i];
        }
        step.push(s / diag[c]);
    }
    Some(step)
}

/// Penalized maximum-likelihood fit by damped Newton iterations.
pub fn fit_logistic<S: Scalar>(design: &LabeledDesign<S>, settings: &FitSettings) -> Result<FittedModel<S>> {
    fit_logistic_warm(design, settings, None)
}

/// As [`fit_logistic`], starting from the coefficients of `init` where its
/// identifiers match the design.
pub fn fit_logistic_warm<S: Scalar>(
    design: &LabeledDesign<S>,
    settings: &FitSettings,
    init: Option<&FittedModel<S>>,
) -> Result<FittedModel<S>> {
    if design.rows.is_empty() {
        return Err(Error::NoVotes);
    }
    if !(settings.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive (got {})", settings.tol)));
    }
    let (lay, rows) = sparse_rows(design);
    let pen = penalties(design, &lay);
    let p0 = weighted_rate(design);
    let mut beta = match init {
        Some(m) => initial_from(m, design, &lay),
        None => {
            let mut b = vec![S::zero(); lay.n_columns()];
            b[0] = logit(p0.max(S::of(1e-6)).min(S::of(1.0 - 1e-6)));
            b
        }
    };
    let tol = S::of(settings.tol);
    let mut f = objective_with(&rows, design, &pen, &beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_iter {
        iterations += 1;
        let grad = gradient_with(&rows, design, &pen, &beta);
        let Some(mut step) = newton_step(&rows, design, &lay, &pen, &beta, &grad) else {
            break;
        };
        let slack = S::of(64.0) * S::epsilon() * (S::one() + f.abs());
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial: Vec<S> = beta.iter().zip(&step).map(|(b, s)| *b + *s).collect();
            let ft = objective_with(&rows, design, &pen, &trial);
            if ft.is_finite() && ft >= f - slack {
                accepted = Some((trial, ft));
                break;
            }
            for s in &mut step {
                *s *= S::half();
            }
        }
        let change = step.iter().fold(S::zero(), |m, s| m.max(s.abs()));
        match accepted {
            Some((trial, ft)) => {
                beta = trial;
                f = ft.max(f);
            }
            None => {
                converged = change < tol;
                break;
            }
        }
        if change < tol {
            converged = true;
            break;
        }
    }

    let mut ll = CompensatedSum::new();
    let mut n_positive = 0;
    for (rc, row) in rows.iter().zip(&design.rows) {
        let eta = rc.eta(&beta);
        if row.label {
            n_positive += 1;
            ll.add(eta - softplus(eta));
        } else {
            ll.add(-softplus(eta));
        }
    }
    let n = design.rows.len();
    let neg = S::of_usize(n - n_positive);
    let null_ll = xlogy(S::of_usize(n_positive), p0) + xlogy(neg, S::one() - p0);
    Ok(unpack(
        design,
        &lay,
        &beta,
        FitMetadata {
            log_likelihood: ll.total(),
            null_log_likelihood: null_ll,
            converged,
            iterations,
            n_rows: n,
            n_positive,
            n_parameters: lay.n_columns(),
        },
    ))
}

/// Weighted positive rate: the intercept-only maximum-likelihood probability.
fn weighted_rate<S: Scalar>(design: &LabeledDesign<S>) -> S {
    let mut pos = CompensatedSum::new();
    let mut tot = CompensatedSum::new();
    for r in &design.rows {
        tot.add(r.weight);
        if r.label {
            pos.add(r.weight);
        }
    }
    pos.total() / tot.total()
}

fn initial_from<S: Scalar>(m: &FittedModel<S>, design: &LabeledDesign<S>, lay: &Layout) -> Vec<S> {
    let mut b = vec![S::zero(); lay.n_columns()];
    b[0] = m.intercept;
    if let Some(c) = lay.t {
        b[c] = m.beta_t1;
    }
    if let Some(c) = lay.t2 {
        b[c] = m.beta_t2;
    }
    let lv = &design.levels;
    for (block, names, map) in [
        (lay.question, &lv.question, &m.question_effects),
        (lay.day, &lv.day, &m.day_effects),
        (lay.worker, &lv.worker, &m.worker_effects),
        (lay.crop, &lv.crop, &m.crop_effects),
    ] {
        for (i, name) in names.iter().enumerate() {
            if let Some(v) = map.get(name) {
                b[block.0 + i] = *v;
            }
        }
    }
    b
}

fn unpack<S: Scalar>(design: &LabeledDesign<S>, lay: &Layout, beta: &[S], meta: FitMetadata<S>) -> FittedModel<S> {
    let block = |(start, len): (usize, usize), names: &[String]| -> BTreeMap<String, S> {
        names.iter().cloned().zip(beta[start..start + len].iter().copied()).collect()
    };
    let lv = &design.levels;
    FittedModel {
        intercept: beta[0],
        beta_t1: lay.t.map_or(S::zero(), |c| beta[c]),
        beta_t2: lay.t2.map_or(S::zero(), |c| beta[c]),
        worker_effects: block(lay.worker, &lv.worker),
        crop_effects: block(lay.crop, &lv.crop),
        question_effects: block(lay.question, &lv.question),
        day_effects: block(lay.day, &lv.day),
        spec: design.spec,
        meta,
    }
}

/// Flat parameter vector of a model in the layout of `design`.
pub fn flat_coefficients<S: Scalar>(m: &FittedModel<S>, design: &LabeledDesign<S>) -> Vec<S> {
    initial_from(m, design, &design.layout())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{DesignLevels, DesignSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intercept_design(n: usize, positives: usize, balanced: bool) -> LabeledDesign<f64> {
        let spec = DesignSpec { class_balanced: balanced, ..DesignSpec::intercept_only() };
        let w = |label: bool| {
            if !balanced {
                1.0
            } else if label {
                n as f64 / (2.0 * positives as f64)
            } else {
                n as f64 / (2.0 * (n - positives) as f64)
            }
        };
        let rows = (0..n)
            .map(|i| {
                let label = i < positives;
                DesignRow { t: 0.0, question: None, day: None, worker: None, crop: None, label, weight: w(label) }
            })
            .collect();
        LabeledDesign { spec, levels: DesignLevels::default(), rows }
    }

    #[test]
    fn intercept_only_matches_logit() {
        let m = fit_logistic(&intercept_design(200, 50, false), &FitSettings::default()).unwrap();
        assert!(m.meta.converged);
        assert!((m.intercept - (0.25f64 / 0.75).ln()).abs() < 1e-8);
        assert!((m.meta.log_likelihood - m.meta.null_log_likelihood).abs() < 1e-9);

        let m = fit_logistic(&intercept_design(200, 50, true), &FitSettings::default()).unwrap();
        assert!(m.intercept.abs() < 1e-8);
    }

    #[test]
    fn empty_design_and_bad_tol() {
        let d = intercept_design(0, 0, false);
        assert!(fit_logistic(&d, &FitSettings::default()).is_err());
        let d = intercept_design(10, 2, false);
        assert!(fit_logistic(&d, &FitSettings { tol: 0.0, ..FitSettings::default() }).is_err());
    }

    fn random_design(rng: &mut ChaCha8Rng, n: usize, lambda: f64) -> LabeledDesign<f64> {
        let spec = DesignSpec {
            include_activity: true,
            include_activity_squared: true,
            include_worker: true,
            include_crop: true,
            include_question: true,
            include_day: false,
            ridge_lambda_worker: lambda,
            ridge_lambda_crop: lambda,
            class_balanced: false,
        };
        let levels = DesignLevels {
            question: vec!["q2".into()],
            day: vec![],
            worker: (0..4).map(|i| format!("w{i}")).collect(),
            crop: (0..6).map(|i| format!("c{i}")).collect(),
        };
        let rows = (0..n)
            .map(|_| DesignRow {
                t: rng.random_range(0.0..4.0),
                question: rng.random_bool(0.5).then_some(0),
                day: None,
                worker: Some(rng.random_range(0..4)),
                crop: Some(rng.random_range(0..6)),
                label: rng.random_bool(0.3),
                weight: rng.random_range(0.5..2.0),
            })
            .collect();
        LabeledDesign { spec, levels, rows }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = random_design(&mut rng, 50, 0.7);
            let k = d.n_columns();
            let beta: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = penalized_gradient(&d, &beta);
            for c in 0..k {
                let h = 1e-5;
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = (penalized_objective(&d, &up) - penalized_objective(&d, &dn)) / (2.0 * h);
                assert!((fd - g[c]).abs() <= 1e-6 * g[c].abs().max(1.0), "col {c}: {fd} vs {}", g[c]);
            }
        }
    }

    #[test]
    fn optimum_has_small_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_design(&mut rng, 400, 1.0);
        let s = FitSettings::default();
        let m = fit_logistic(&d, &s).unwrap();
        assert!(m.meta.converged);
        let g = penalized_gradient(&d, &flat_coefficients(&m, &d));
        assert!(g.iter().all(|x| x.abs() < 10.0 * s.tol), "{g:?}");
        assert!(m.meta.log_likelihood >= m.meta.null_log_likelihood);
    }

    #[test]
    fn iterations_never_decrease_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_design(&mut rng, 300, 0.5);
        let mut prev = f64::NEG_INFINITY;
        for it in 1..8 {
            let m = fit_logistic(&d, &FitSettings { max_iter: it, ..FitSettings::default() }).unwrap();
            let f = penalized_objective(&d, &flat_coefficients(&m, &d));
            assert!(f >= prev - 1e-12);
            prev = f;
        }
    }

    #[test]
    fn schur_elimination_matches_dense_solve() {
        // The same crop effects fitted once through the eliminated block and
        // once as an ordinary dense block.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut d = random_design(&mut rng, 200, 0.8);
        d.spec.include_worker = false;
        d.levels.worker.clear();
        for r in &mut d.rows {
            r.worker = None;
        }
        let m = fit_logistic(&d, &FitSettings::default()).unwrap();
        let mut dense = d.clone();
        dense.spec.include_crop = false;
        dense.spec.include_worker = true;
        dense.levels.worker = std::mem::take(&mut dense.levels.crop);
        for r in &mut dense.rows {
            r.worker = r.crop.take();
        }
        let m2 = fit_logistic(&dense, &FitSettings::default()).unwrap();
        assert!(m.meta.converged && m2.meta.converged);
        for (k, v) in &m.crop_effects {
            assert!((v - m2.worker_effects[k]).abs() < 1e-9);
        }
        assert!((m.intercept - m2.intercept).abs() < 1e-9);
    }

    #[test]
    fn row_order_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let d = random_design(&mut rng, 300, 1.0);
        let mut rev = d.clone();
        rev.rows.reverse();
        let a = fit_logistic(&d, &FitSettings::default()).unwrap();
        let b = fit_logistic(&rev, &FitSettings::default()).unwrap();
        let pa = a.predict_design(&d);
        let pb = b.predict_design(&d);
        for (x, y) in pa.iter().zip(&pb) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn heavy_ridge_shrinks_effects() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_design(&mut rng, 300, 1e9);
        let m = fit_logistic(&d, &FitSettings::default()).unwrap();
        assert!(m.worker_effects.values().all(|v| v.abs() < 1e-6));
        assert!(m.crop_effects.values().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn warm_start_reaches_same_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random_design(&mut rng, 300, 1.0);
        let cold = fit_logistic(&d, &FitSettings::default()).unwrap();
        let warm = fit_logistic_warm(&d, &FitSettings::default(), Some(&cold)).unwrap();
        assert!(warm.meta.iterations <= 2);
        assert!((warm.intercept - cold.intercept).abs() < 1e-8);
    }

    #[test]
    fn f32_fit_close_to_f64() {
        let d64 = intercept_design(100, 30, false);
        let d32 = LabeledDesign {
            spec: d64.spec,
            levels: d64.levels.clone(),
            rows: d64
                .rows
                .iter()
                .map(|r| DesignRow {
                    t: 0.0f32,
                    question: None,
                    day: None,
                    worker: None,
                    crop: None,
                    label: r.label,
                    weight: 1.0,
                })
                .collect(),
        };
        let m = fit_logistic(&d32, &FitSettings { tol: 1e-5, ..FitSettings::default() }).unwrap();
        assert!((m.intercept as f64 - (0.3f64 / 0.7).ln()).abs() < 1e-4);
    }
}
