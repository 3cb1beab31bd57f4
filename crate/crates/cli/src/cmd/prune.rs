use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use mrprune::glm::{DesignSpec, FitSettings};
use mrprune::pruner::{
    horizon_hours, run_policy, sweep, write_decision_log, write_sweep_csv, PruneMode, PrunePolicy, Recalibration,
};
use serde::Serialize;

use super::load_log;
use crate::args::ratio;
use crate::output::{ensure_dir, write_atomic, write_json, CliError, CliResult, RunManifest};
use crate::DEFAULT_SEED;

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    log: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Prune when the predicted minority probability exceeds this.
    #[arg(long, value_parser = ratio, default_value = "0.99")]
    theta: f64,
    /// Hours between refits, or `inf`.
    #[arg(long, default_value = "1")]
    delta: Recalibration,
    /// Warm-up length in hours.
    #[arg(long, default_value_t = 36.0)]
    tau: f64,
    /// predictive, np or aw.
    #[arg(long, default_value = "predictive")]
    mode: PruneMode,
    #[arg(long, default_value_t = 1)]
    min_retained: usize,
    #[arg(long, default_value_t = 1.0)]
    ridge_worker: f64,
    #[arg(long, default_value_t = 1.0)]
    ridge_crop: f64,
    /// Threshold grid for a sweep, e.g. `0.99,0.5,0.1`.
    #[arg(long, value_parser = ratio, value_delimiter = ',')]
    sweep_theta: Option<Vec<f64>>,
    /// Recalibration grid for a sweep, e.g. `1,2,inf`.
    #[arg(long, value_delimiter = ',')]
    sweep_delta: Option<Vec<Recalibration>>,
    /// Mode grid for a sweep, e.g. `predictive,np`.
    #[arg(long, value_delimiter = ',')]
    sweep_mode: Option<Vec<PruneMode>>,
    /// Worker threads for sweeps.
    #[arg(long, env = "MRPRUNE_JOBS")]
    jobs: Option<usize>,
    /// Recorded in outputs; the replay itself is deterministic.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

impl PruneArgs {
    fn is_sweep(&self) -> bool {
        self.sweep_theta.is_some() || self.sweep_delta.is_some() || self.sweep_mode.is_some()
    }

    fn policy(&self, theta: f64, delta: Recalibration, mode: PruneMode) -> PrunePolicy {
        PrunePolicy {
            min_retained_per_task: self.min_retained,
            design: DesignSpec {
                ridge_lambda_worker: self.ridge_worker,
                ridge_lambda_crop: self.ridge_crop,
                ..DesignSpec::pruning()
            },
            ..PrunePolicy::new(theta, delta, self.tau, mode)
        }
    }

    /// Grid in mode, delta, descending-theta order. NP ignores theta, so it
    /// contributes one policy per delta.
    fn grid(&self) -> Vec<PrunePolicy> {
        let mut thetas = self.sweep_theta.clone().unwrap_or_else(|| vec![self.theta]);
        thetas.sort_by(|a, b| b.total_cmp(a));
        thetas.dedup();
        let deltas = self.sweep_delta.clone().unwrap_or_else(|| vec![self.delta]);
        let modes = self.sweep_mode.clone().unwrap_or_else(|| vec![self.mode]);
        let mut out = Vec::new();
        for &mode in &modes {
            for &delta in &deltas {
                if mode == PruneMode::Np {
                    out.push(self.policy(0.0, delta, mode));
                } else {
                    out.extend(thetas.iter().map(|&t| self.policy(t, delta, mode)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Serialize)]
struct SweepConfig<'a> {
    tau_hours: f64,
    min_retained: usize,
    grid: &'a [PrunePolicy],
}

pub fn run(a: PruneArgs) -> CliResult<()> {
    let started = Instant::now();
    let grid = a.grid();
    for p in &grid {
        p.validate()?;
    }
    let records = load_log(&a.log)?;
    let times: Vec<i64> = records.iter().map(|r| r.start_time).collect();
    let horizon = horizon_hours(&times);
    if a.tau > horizon {
        return Err(CliError::usage(format!("--tau {} exceeds the log's horizon of {horizon} h", a.tau)));
    }
    ensure_dir(&a.out)?;
    let settings = FitSettings::default();

    if a.is_sweep() {
        let jobs = a.jobs.unwrap_or(0);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::usage(format!("--jobs: {e}")))?;
        let rows = pool.install(|| sweep(&records, &grid, &settings))?;
        let path = a.out.join("sweep.csv");
        write_atomic(&path, |w| Ok(write_sweep_csv(w, &rows)?))?;
        let config = serde_json::to_value(SweepConfig { tau_hours: a.tau, min_retained: a.min_retained, grid: &grid })?;
        let mut manifest = RunManifest::new("prune", config, a.seed);
        manifest.input(&a.log);
        manifest.output(&path);
        manifest.finish(started, &a.out.join("manifest.json"))?;
        for r in &rows {
            println!(
                "{:<10} theta {:<6} delta {:<4} prune {:.4} acc {:.4} f1 {:.4}",
                r.mode.as_str(),
                r.theta,
                r.delta_hours.to_string(),
                r.prune_rate,
                r.accuracy,
                r.f1
            );
        }
        return Ok(());
    }

    let policy = &grid[0];
    let (out, mut report) = run_policy(&records, policy, &settings)?;
    report.seed = Some(a.seed);
    let decisions = a.out.join("decisions.csv");
    write_atomic(&decisions, |w| Ok(write_decision_log(w, &out.decisions)?))?;
    let eval = a.out.join("eval.json");
    write_json(&eval, &report)?;
    let trace = a.out.join("refits.json");
    write_json(&trace, &out.trace)?;
    let mut manifest = RunManifest::new("prune", serde_json::to_value(policy)?, a.seed);
    manifest.input(&a.log);
    for p in [&decisions, &eval, &trace] {
        manifest.output(p);
    }
    manifest.finish(started, &a.out.join("manifest.json"))?;
    let refit_s: f64 = out.trace.iter().map(|t| t.elapsed_s).sum();
    eprintln!("{} refits in {refit_s:.2} s", out.trace.len());
    if out.degenerate_refits() > 0 {
        eprintln!("warning: {} degenerate refit(s) kept the previous model", out.degenerate_refits());
    }
    println!("prune_rate {:.4}  accuracy {:.4}  f1 {:.4}", report.prune_rate, report.accuracy, report.f1);
    Ok(())
}
