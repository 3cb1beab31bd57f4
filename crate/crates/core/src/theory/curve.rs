use std::io::{Read, Write};

use super::{gaussian_rates, p_err, prune_rate, ClassifierRates, GaussianScoreModel, TheoryConfig};
use crate::error::{Error, Result};
use crate::numfmt::sig17;
use crate::scalar::Scalar;

pub const CURVE_HEADER: [&str; 8] = ["n", "p", "theta", "q_t", "q_f", "r", "p_err", "accuracy"];

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifierSource<S> {
    Fixed(ClassifierRates<S>),
    Gaussian { model: GaussianScoreModel<S>, thetas: Vec<S> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveRow<S> {
    pub n: usize,
    pub p: S,
    pub theta: Option<S>,
    pub q_t: S,
    pub q_f: S,
    pub r: S,
    pub p_err: S,
    pub accuracy: S,
}

/// Accuracy after pruning over a grid of disagreement rates (and thresholds,
/// for the Gaussian classifier). Rows are ordered by `p`, then by threshold.
pub fn accuracy_curve<S: Scalar>(n: usize, source: &ClassifierSource<S>, p_grid: &[S]) -> Result<Vec<CurveRow<S>>> {
    if p_grid.is_empty() {
        return Err(Error::InvalidArgument("empty p grid".into()));
    }
    let classifiers: Vec<(Option<S>, ClassifierRates<S>)> = match source {
        ClassifierSource::Fixed(r) => vec![(None, *r)],
        ClassifierSource::Gaussian { model, thetas } => {
            if thetas.is_empty() {
                return Err(Error::InvalidArgument("empty theta grid".into()));
            }
            thetas.iter().map(|&th| gaussian_rates(model, th).map(|r| (Some(th), r))).collect::<Result<_>>()?
        }
    };
    let mut rows = Vec::with_capacity(p_grid.len() * classifiers.len());
    for &p in p_grid {
        let cfg = TheoryConfig::new(n, p)?;
        for (theta, rates) in &classifiers {
            let err = p_err(&cfg, rates)?;
            rows.push(CurveRow {
                n,
                p,
                theta: *theta,
                q_t: rates.q_t,
                q_f: rates.q_f,
                r: prune_rate(p, rates),
                p_err: err,
                accuracy: S::one() - err,
            });
        }
    }
    Ok(rows)
}

pub fn write_curve_csv<S: Scalar, W: Write>(writer: W, rows: &[CurveRow<S>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_HEADER)?;
    for row in rows {
        w.write_record([
            row.n.to_string(),
            sig17(row.p.as_f64()),
            row.theta.map(|t| sig17(t.as_f64())).unwrap_or_default(),
            sig17(row.q_t.as_f64()),
            sig17(row.q_f.as_f64()),
            sig17(row.r.as_f64()),
            sig17(row.p_err.as_f64()),
            sig17(row.accuracy.as_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve_csv<R: Read>(reader: R) -> Result<Vec<CurveRow<f64>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if headers.iter().ne(CURVE_HEADER.iter().copied()) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", CURVE_HEADER.join(",")) });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let num = |c: usize| -> Result<f64> {
            rec[c].parse::<f64>().map_err(|e| Error::Parse { line, message: format!("{}: {e}", CURVE_HEADER[c]) })
        };
        rows.push(CurveRow {
            n: rec[0].parse().map_err(|e| Error::Parse { line, message: format!("n: {e}") })?,
            p: num(1)?,
            theta: if rec[2].is_empty() { None } else { Some(num(2)?) },
            q_t: num(3)?,
            q_f: num(4)?,
            r: num(5)?,
            p_err: num(6)?,
            accuracy: num(7)?,
        });
    }
    Ok(rows)
}
