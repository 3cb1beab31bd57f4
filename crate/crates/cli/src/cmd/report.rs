use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use mrprune::numfmt::sig17;
use mrprune::pruner::{read_sweep_csv, EvalReport, PruneMode, Recalibration, SWEEP_HEADER};
use mrprune::theory::{read_curve_csv, CURVE_HEADER};
use mrprune::CurveRow;

use crate::output::{sibling, write_atomic, CliError, CliResult, RunManifest};
use crate::DEFAULT_SEED;

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sweep CSVs, evaluation JSONs or theory curve CSVs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Markdown report; a CSV of the same tables is written next to it.
    #[arg(long, default_value = "report.md")]
    out: PathBuf,
}

#[derive(Debug, Clone)]
struct PolicyRow {
    source: String,
    mode: Option<PruneMode>,
    theta: Option<f64>,
    delta: Option<Recalibration>,
    prune_rate: f64,
    accuracy: f64,
    f1: f64,
}

#[derive(Debug, Clone)]
struct CurveSummary {
    source: String,
    n: usize,
    p: f64,
    points: usize,
    r_min: f64,
    r_max: f64,
    acc_min: f64,
    acc_max: f64,
    /// Accuracy never rises as the prune rate grows.
    monotone: bool,
}

fn mode_rank(m: Option<PruneMode>) -> u8 {
    match m {
        Some(PruneMode::Predictive) => 0,
        Some(PruneMode::Aw) => 1,
        Some(PruneMode::Np) => 2,
        None => 3,
    }
}

fn delta_key(d: Option<Recalibration>) -> f64 {
    d.map_or(f64::NAN, |d| d.hours())
}

/// Mode, then recalibration interval, then descending threshold.
fn policy_order(a: &PolicyRow, b: &PolicyRow) -> Ordering {
    mode_rank(a.mode)
        .cmp(&mode_rank(b.mode))
        .then(delta_key(a.delta).total_cmp(&delta_key(b.delta)))
        .then(b.theta.unwrap_or(f64::NAN).total_cmp(&a.theta.unwrap_or(f64::NAN)))
        .then(a.source.cmp(&b.source))
}

fn first_line(path: &Path) -> CliResult<String> {
    let f = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line)?;
    Ok(line.trim().to_string())
}

fn summarize(source: &str, rows: &[CurveRow]) -> Vec<CurveSummary> {
    let mut groups: BTreeMap<(usize, u64), Vec<&CurveRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.n, r.p.to_bits())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|mut g| {
            g.sort_by(|a, b| a.r.total_cmp(&b.r));
            let monotone = g.windows(2).all(|w| w[1].accuracy <= w[0].accuracy + 1e-12);
            CurveSummary {
                source: source.to_string(),
                n: g[0].n,
                p: g[0].p,
                points: g.len(),
                r_min: g[0].r,
                r_max: g[g.len() - 1].r,
                acc_min: g.iter().map(|r| r.accuracy).fold(f64::INFINITY, f64::min),
                acc_max: g.iter().map(|r| r.accuracy).fold(f64::NEG_INFINITY, f64::max),
                monotone,
            }
        })
        .collect()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

pub fn run(a: ReportArgs) -> CliResult<()> {
    let started = Instant::now();
    let mut policies = Vec::new();
    let mut curves = Vec::new();
    for path in &a.inputs {
        let source = path.display().to_string();
        let is_json = path.extension().is_some_and(|e| e == "json");
        if is_json {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{source}: {e}")))?;
            let r: EvalReport = serde_json::from_str(&text).map_err(|e| CliError::io(format!("{source}: {e}")))?;
            let pol = r.policy.as_ref();
            policies.push(PolicyRow {
                source,
                mode: pol.map(|p| p.mode),
                theta: pol.map(|p| p.effective_theta()),
                delta: pol.map(|p| p.delta),
                prune_rate: r.prune_rate,
                accuracy: r.accuracy,
                f1: r.f1,
            });
            continue;
        }
        let header = first_line(path)?;
        let open = || File::open(path).map_err(|e| CliError::io(format!("{source}: {e}")));
        if header == SWEEP_HEADER.join(",") {
            let rows = read_sweep_csv(open()?).map_err(|e| CliError::from(e).context(&source))?;
            policies.extend(rows.into_iter().map(|r| PolicyRow {
                source: source.clone(),
                mode: Some(r.mode),
                theta: Some(r.theta),
                delta: Some(r.delta_hours),
                prune_rate: r.prune_rate,
                accuracy: r.accuracy,
                f1: r.f1,
            }));
        } else if header == CURVE_HEADER.join(",") {
            let rows = read_curve_csv(open()?).map_err(|e| CliError::from(e).context(&source))?;
            curves.extend(summarize(&source, &rows));
        } else {
            return Err(CliError::usage(format!("{source}: not a sweep CSV, curve CSV or evaluation JSON")));
        }
    }
    policies.sort_by(policy_order);

    let mut md = String::from("# Pruning report\n");
    if !policies.is_empty() {
        md.push_str("\n## Pruning policies\n\n");
        md.push_str("| mode | theta | delta (h) | prune rate | accuracy | F1 | source |\n");
        md.push_str("|---|---:|---:|---:|---:|---:|---|\n");
        for p in &policies {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.4} | {:.4} | {:.4} | {} |",
                opt(p.mode.map(|m| m.as_str())),
                opt(p.theta),
                opt(p.delta),
                p.prune_rate,
                p.accuracy,
                p.f1,
                p.source
            );
        }
    }
    if !curves.is_empty() {
        md.push_str("\n## Theory curves\n\n");
        md.push_str("| n | p | points | prune rate range | accuracy range | accuracy nonincreasing in r | source |\n");
        md.push_str("|---:|---:|---:|---|---|---|---|\n");
        for c in &curves {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {:.4} to {:.4} | {:.6} to {:.6} | {} | {} |",
                c.n,
                c.p,
                c.points,
                c.r_min,
                c.r_max,
                c.acc_min,
                c.acc_max,
                if c.monotone { "yes" } else { "no" },
                c.source
            );
        }
    }
    write_atomic(&a.out, |w| Ok(w.write_all(md.as_bytes())?))?;

    let csv_path = sibling(&a.out, "csv");
    write_atomic(&csv_path, |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "section",
            "source",
            "mode",
            "theta",
            "delta_hours",
            "n",
            "p",
            "prune_rate",
            "accuracy",
            "f1",
            "monotone",
        ])?;
        for p in &policies {
            c.write_record([
                "pruning".to_string(),
                p.source.clone(),
                p.mode.map(|m| m.as_str().to_string()).unwrap_or_default(),
                p.theta.map(sig17).unwrap_or_default(),
                p.delta.map(|d| d.to_string()).unwrap_or_default(),
                String::new(),
                String::new(),
                sig17(p.prune_rate),
                sig17(p.accuracy),
                sig17(p.f1),
                String::new(),
            ])?;
        }
        for s in &curves {
            c.write_record([
                "theory".to_string(),
                s.source.clone(),
                String::new(),
                String::new(),
                String::new(),
                s.n.to_string(),
                sig17(s.p),
                sig17(s.r_max),
                sig17(s.acc_min),
                String::new(),
                s.monotone.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let mut manifest = RunManifest::new("report", serde_json::json!({}), DEFAULT_SEED);
    for p in &a.inputs {
        manifest.input(p);
    }
    manifest.output(&a.out);
    manifest.output(&csv_path);
    manifest.finish(started, &sibling(&a.out, "manifest.json"))?;
    print!("{md}");
    Ok(())
}
