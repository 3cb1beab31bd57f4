use std::io::{Read, Write};

use super::{Decision, DecisionEntry, PruneMode, Recalibration, Rule, SweepRow};
use crate::annotation::TaskKey;
use crate::error::{Error, Result};
use crate::numfmt::sig17;

pub const DECISION_HEADER: [&str; 7] =
    ["crop_id", "question_id", "worker_id", "scheduled_s", "decision", "rule", "predicted_p"];
pub const SWEEP_HEADER: [&str; 6] = ["theta", "delta_hours", "mode", "prune_rate", "accuracy", "f1"];

pub fn write_decision_log<W: Write>(writer: W, entries: &[DecisionEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DECISION_HEADER)?;
    for e in entries {
        let p = e.predicted_p.map(sig17).unwrap_or_default();
        w.write_record([
            e.task.crop_id.as_str(),
            e.task.question_id.as_str(),
            e.worker_id.as_str(),
            &e.scheduled_s.to_string(),
            e.decision.as_str(),
            e.rule.as_str(),
            &p,
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse { line: 1, message: format!("expected header {}", expected.join(",")) });
    }
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: u64, name: &str) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| Error::Parse { line: line as usize, message: format!("bad {name} {raw:?}") })
}

pub fn read_decision_log<R: Read>(reader: R) -> Result<Vec<DecisionEntry>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &DECISION_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let decision = match rec.get(4) {
            Some("retained") => Decision::Retained,
            Some("pruned") => Decision::Pruned,
            other => return Err(Error::Parse { line: line as usize, message: format!("bad decision {other:?}") }),
        };
        let rule: Rule =
            rec.get(5).unwrap_or("").parse().map_err(|m| Error::Parse { line: line as usize, message: m })?;
        let predicted_p = match rec.get(6) {
            Some("") | None => None,
            Some(_) => Some(field(&rec, 6, line, "predicted_p")?),
        };
        out.push(DecisionEntry {
            task: TaskKey::new(rec.get(0).unwrap_or(""), rec.get(1).unwrap_or("")),
            worker_id: rec.get(2).unwrap_or("").to_string(),
            scheduled_s: field(&rec, 3, line, "scheduled_s")?,
            decision,
            rule,
            predicted_p,
        });
    }
    Ok(out)
}

pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            sig17(r.theta),
            r.delta_hours.to_string(),
            r.mode.as_str().to_string(),
            sig17(r.prune_rate),
            sig17(r.accuracy),
            sig17(r.f1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(reader: R) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(r.headers()?, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let delta: Recalibration = field(&rec, 1, line, "delta_hours")?;
        let mode: PruneMode = field(&rec, 2, line, "mode")?;
        out.push(SweepRow {
            theta: field(&rec, 0, line, "theta")?,
            delta_hours: delta,
            mode,
            prune_rate: field(&rec, 3, line, "prune_rate")?,
            accuracy: field(&rec, 4, line, "accuracy")?,
            f1: field(&rec, 5, line, "f1")?,
        });
    }
    Ok(out)
}
