use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use mrprune::annotation::{minority_labels, sessionize, RepeatRecord, DEFAULT_GAP_MINUTES};
use mrprune::diagnostics::{deviance_residual, dispersion_ratio, durbin_watson};
use mrprune::glm::{
    auc, build_design, fit_logistic, likelihood_ratio_test, pseudo_r2, DesignSpec, FitSettings, ModelVariant,
};
use mrprune::FittedModel;
use serde::Serialize;

use super::load_log;
use crate::output::{sibling, write_atomic, write_json, CliError, CliResult, RunManifest};
use crate::DEFAULT_SEED;

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    log: PathBuf,
    /// base, a, aw, ac or awc.
    #[arg(long, default_value = "awc")]
    model: ModelVariant,
    /// Model JSON; metrics and manifest are written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    ridge_worker: f64,
    #[arg(long, default_value_t = 1.0)]
    ridge_crop: f64,
    /// Weight each class by total / (2 × class count).
    #[arg(long)]
    class_balanced: bool,
    /// Inactivity gap that splits activity sessions.
    #[arg(long, default_value_t = DEFAULT_GAP_MINUTES)]
    gap_minutes: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Recorded in the manifest; fitting is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Lrt {
    against: &'static str,
    statistic: f64,
    p_value: f64,
    dof: usize,
}

#[derive(Debug, Serialize)]
struct Metrics {
    model: &'static str,
    auc: f64,
    pseudo_r2: f64,
    log_likelihood: f64,
    null_log_likelihood: f64,
    converged: bool,
    iterations: usize,
    n_rows: usize,
    n_positive: usize,
    n_parameters: usize,
    durbin_watson: Option<f64>,
    dispersion: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lrt: Option<Lrt>,
}

fn spec_for(v: ModelVariant, a: &FitArgs) -> DesignSpec {
    DesignSpec {
        ridge_lambda_worker: a.ridge_worker,
        ridge_lambda_crop: a.ridge_crop,
        class_balanced: a.class_balanced,
        ..DesignSpec::variant(v)
    }
}

fn fit_variant(
    records: &[RepeatRecord],
    flags: &[bool],
    v: ModelVariant,
    a: &FitArgs,
) -> CliResult<(FittedModel, Vec<f64>)> {
    let sessions = sessionize(records, a.gap_minutes)?;
    let design = build_design(records, flags, Some(&sessions), &spec_for(v, a))?;
    let model = fit_logistic(&design, &FitSettings { tol: a.tol, max_iter: a.max_iter, ..FitSettings::default() })?;
    let fitted = model.predict_design(&design);
    Ok((model, fitted))
}

pub fn run(a: FitArgs) -> CliResult<()> {
    let started = Instant::now();
    if !(a.ridge_worker >= 0.0 && a.ridge_crop >= 0.0) {
        return Err(CliError::usage("ridge penalties must be nonnegative"));
    }
    let records = load_log(&a.log)?;
    let flags = minority_labels(&records);
    let pos = flags.iter().filter(|&&f| f).count();
    if pos == 0 || pos == flags.len() {
        return Err(CliError::degenerate(format!(
            "degenerate labels: {pos} minority reports among {} repeats",
            flags.len()
        )));
    }
    let (model, fitted) = fit_variant(&records, &flags, a.model, &a)?;
    if !model.meta.converged {
        eprintln!("warning: fit did not converge in {} iterations", model.meta.iterations);
    }
    let lrt = if a.model == ModelVariant::Base {
        None
    } else {
        let (base, _) = fit_variant(&records, &flags, ModelVariant::Base, &a)?;
        let dof = model.meta.n_parameters - base.meta.n_parameters;
        let (statistic, p_value) = likelihood_ratio_test(&base, &model, dof)?;
        Some(Lrt { against: "base", statistic, p_value, dof })
    };
    // Residuals in time order for the serial-correlation check.
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| (records[i].start_time, i));
    let resid: Vec<f64> = order.iter().map(|&i| deviance_residual(flags[i], fitted[i])).collect();
    let dof = records.len().saturating_sub(model.meta.n_parameters);
    let metrics = Metrics {
        model: a.model.as_str(),
        auc: auc(&fitted, &flags)?,
        pseudo_r2: pseudo_r2(&model)?,
        log_likelihood: model.meta.log_likelihood,
        null_log_likelihood: model.meta.null_log_likelihood,
        converged: model.meta.converged,
        iterations: model.meta.iterations,
        n_rows: model.meta.n_rows,
        n_positive: model.meta.n_positive,
        n_parameters: model.meta.n_parameters,
        durbin_watson: durbin_watson(&resid).ok(),
        dispersion: dispersion_ratio(&resid, dof).ok(),
        lrt,
    };

    let json = model.to_json()?;
    write_atomic(&a.out, |w| {
        w.write_all(json.as_bytes())?;
        w.write_all(b"\n")?;
        Ok(())
    })?;
    let metrics_path = sibling(&a.out, "metrics.json");
    write_json(&metrics_path, &metrics)?;

    let config = serde_json::json!({
        "model": a.model.as_str(),
        "ridge_worker": a.ridge_worker,
        "ridge_crop": a.ridge_crop,
        "class_balanced": a.class_balanced,
        "gap_minutes": a.gap_minutes,
        "tol": a.tol,
        "max_iter": a.max_iter,
    });
    let mut manifest = RunManifest::new("fit", config, a.seed);
    manifest.input(&a.log);
    manifest.output(&a.out);
    manifest.output(&metrics_path);
    manifest.finish(started, &sibling(&a.out, "manifest.json"))?;
    println!("auc {:.4}  pseudo_r2 {:.4}  converged {}", metrics.auc, metrics.pseudo_r2, metrics.converged);
    Ok(())
}
