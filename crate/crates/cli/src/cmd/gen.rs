use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use mrprune::annotation::write_log;
use mrprune::synthgen::{generate, write_crop_truth, write_worker_truth, GenConfig};
use mrprune::Error;

use crate::output::{ensure_dir, write_atomic, CliError, CliResult, RunManifest};

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Generator config (`key = value` lines); defaults apply to unset keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

pub fn run(a: GenArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            GenConfig::parse(&text)
                .map_err(|e| match e {
                    Error::Parse { .. } | Error::InvalidConfig(_) => CliError::usage(e.to_string()),
                    other => CliError::from(other),
                })
                .map_err(|e| e.context(p.display()))?
        }
        None => GenConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if cfg.theory_check && cfg.repeats.contains_even() {
        eprintln!("warning: Assumption 1 requires odd n (repeat range {} contains even counts)", cfg.repeats);
    }
    let g = generate(&cfg)?;

    ensure_dir(&a.out)?;
    let config_json = serde_json::to_value(&cfg)?;
    let mut manifest = RunManifest::new("gen", config_json, cfg.seed);
    if let Some(p) = &a.config {
        manifest.input(p);
    }
    let log = a.out.join("log.csv");
    write_atomic(&log, |w| Ok(write_log(w, &g.records)?))?;
    let crops = a.out.join("truth_crops.csv");
    write_atomic(&crops, |w| Ok(write_crop_truth(w, &g.crops)?))?;
    let workers = a.out.join("truth_workers.csv");
    write_atomic(&workers, |w| Ok(write_worker_truth(w, &g.workers)?))?;
    for p in [&log, &crops, &workers] {
        manifest.output(p);
    }
    manifest.finish(started, &a.out.join("manifest.json"))?;
    eprintln!("wrote {} repeats to {}", g.records.len(), log.display());
    Ok(())
}
