use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Subcommand};
use mrprune::theory::{
    accuracy_curve, beta_gamma, gaussian_auc, p_err, p_err_oracle, prune_rate, write_curve_csv, ClassifierSource,
    OracleMethod, MAX_ENUMERATION_N,
};
use mrprune::{ClassifierRates, GaussianScoreModel, TheoryConfig};

use crate::args::ratio;
use crate::output::{write_atomic, CliError, CliResult};
use crate::DEFAULT_SEED;

#[derive(Debug, Args)]
pub struct TheoryArgs {
    #[command(subcommand)]
    command: TheoryCommand,
}

#[derive(Debug, Args)]
struct Rates {
    /// Repeats per task (odd).
    #[arg(long)]
    n: usize,
    /// True-positive rate of the pruning classifier.
    #[arg(long, value_parser = ratio)]
    qt: f64,
    /// False-positive rate of the pruning classifier.
    #[arg(long, value_parser = ratio)]
    qf: f64,
}

#[derive(Debug, Subcommand)]
enum TheoryCommand {
    /// Probability that pruning flips a task's majority.
    Perr {
        #[command(flatten)]
        rates: Rates,
        /// Probability a vote disagrees with the task's majority.
        #[arg(long, value_parser = ratio)]
        p: f64,
    },
    /// Accuracy against prune rate over a grid of p (and thresholds).
    Curve {
        #[arg(long)]
        n: usize,
        /// Comma-separated disagreement rates.
        #[arg(long, value_parser = ratio, value_delimiter = ',', required = true)]
        p: Vec<f64>,
        /// Gaussian score classes `mu1,mu0,sigma`; sweeps thresholds.
        #[arg(long, value_parser = ratio, value_delimiter = ',', allow_negative_numbers = true, conflicts_with_all = ["qt", "qf"])]
        gauss: Option<Vec<f64>>,
        /// Thresholds for the Gaussian sweep (default 0.01 to 0.99 by 0.01).
        #[arg(long, value_parser = ratio, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long, value_parser = ratio, requires = "qf")]
        qt: Option<f64>,
        #[arg(long, value_parser = ratio, requires = "qt")]
        qf: Option<f64>,
        /// CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed form next to exhaustive enumeration or Monte Carlo.
    Oracle {
        #[command(flatten)]
        rates: Rates,
        #[arg(long, value_parser = ratio)]
        p: f64,
        /// Monte Carlo samples; enumeration is used when absent and n is small.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Per-k flip probabilities given exactly k majority votes.
    Lemma {
        #[command(flatten)]
        rates: Rates,
    },
}

fn rates(qt: f64, qf: f64) -> CliResult<ClassifierRates> {
    Ok(ClassifierRates::new(qt, qf)?)
}

pub fn run(a: TheoryArgs) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    match a.command {
        TheoryCommand::Perr { rates: r, p } => {
            let v = p_err(&TheoryConfig::new(r.n, p)?, &rates(r.qt, r.qf)?)?;
            writeln!(out, "{v}")?;
        }
        TheoryCommand::Curve { n, p, gauss, thetas, qt, qf, out: path } => {
            let source = match (gauss, qt, qf) {
                (Some(g), _, _) => {
                    let [mu1, mu0, sigma] = g[..] else {
                        return Err(CliError::usage("--gauss takes mu1,mu0,sigma"));
                    };
                    let model = GaussianScoreModel::new(mu1, mu0, sigma)?;
                    let thetas = thetas.unwrap_or_else(|| (1..100).map(|i| i as f64 / 100.0).collect());
                    eprintln!("auc {}", gaussian_auc(&model));
                    ClassifierSource::Gaussian { model, thetas }
                }
                (None, Some(qt), Some(qf)) => ClassifierSource::Fixed(rates(qt, qf)?),
                _ => return Err(CliError::usage("curve needs --gauss or both --qt and --qf")),
            };
            let rows = accuracy_curve(n, &source, &p)?;
            match path {
                Some(path) => write_atomic(&path, |w| Ok(write_curve_csv(w, &rows)?))?,
                None => write_curve_csv(&mut out, &rows)?,
            }
        }
        TheoryCommand::Oracle { rates: r, p, samples, seed } => {
            let cfg = TheoryConfig::new(r.n, p)?;
            let rt = rates(r.qt, r.qf)?;
            let closed = p_err(&cfg, &rt)?;
            let method = match samples {
                Some(samples) => OracleMethod::MonteCarlo { samples, seed },
                None if r.n <= MAX_ENUMERATION_N => OracleMethod::Enumerate,
                None => return Err(CliError::usage(format!("n > {MAX_ENUMERATION_N} needs --samples"))),
            };
            let est = p_err_oracle(&cfg, &rt, method)?;
            writeln!(out, "closed_form {closed}")?;
            writeln!(out, "oracle      {}", est.value)?;
            if est.std_error > 0.0 {
                writeln!(out, "std_error   {}", est.std_error)?;
            }
            writeln!(out, "abs_diff    {:e}", (closed - est.value).abs())?;
            writeln!(out, "prune_rate  {}", prune_rate(p, &rt))?;
        }
        TheoryCommand::Lemma { rates: r } => {
            let cfg = TheoryConfig::new(r.n, 0.0)?;
            let rt = rates(r.qt, r.qf)?;
            writeln!(out, "k,beta_k,gamma_k")?;
            for k in cfg.min_majority()..=r.n {
                let (b, g) = beta_gamma(r.n, k, &rt)?;
                writeln!(out, "{k},{b},{g}")?;
            }
        }
    }
    Ok(())
}
