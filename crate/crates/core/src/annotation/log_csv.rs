use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{RepeatRecord, Response, TaskKey};
use crate::error::{Error, Result};

pub const LOG_HEADER: [&str; 8] =
    ["task_id", "crop_id", "question_id", "worker_id", "start_time_s", "duration_s", "response", "day"];

/// Calendar day (`YYYY-MM-DD`) of a timestamp shifted by a timezone offset.
pub fn day_label(start_time: i64, tz_offset_s: i64) -> String {
    match chrono::DateTime::from_timestamp(start_time + tz_offset_s, 0) {
        Some(dt) => dt.date_naive().format("%Y-%m-%d").to_string(),
        None => format!("day{}", (start_time + tz_offset_s).div_euclid(86_400)),
    }
}

/// Parses an annotation log. Errors carry the 1-based line number.
pub fn read_log<R: Read>(reader: R) -> Result<Vec<RepeatRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse { line: 1, message: format!("missing column {name}") })
    };
    let crop = col("crop_id")?;
    let question = col("question_id")?;
    let worker = col("worker_id")?;
    let start = col("start_time_s")?;
    let duration = col("duration_s")?;
    let response = col("response")?;
    let day = col("day")?;

    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse { line, message: e.to_string() })?;
        let field = |c: usize| -> Result<&str> {
            row.get(c).ok_or_else(|| Error::Parse { line, message: format!("missing field {}", c + 1) })
        };
        let bad = |message: String| Error::Parse { line, message };
        let start_time: i64 = field(start)?.parse().map_err(|e| bad(format!("start_time_s: {e}")))?;
        let dur: f64 = field(duration)?.parse().map_err(|e| bad(format!("duration_s: {e}")))?;
        if !(dur >= 0.0) || !dur.is_finite() {
            return Err(bad(format!("duration_s must be a finite non-negative number, got {dur}")));
        }
        let resp: Response = field(response)?.parse().map_err(bad)?;
        out.push(RepeatRecord {
            task: TaskKey::new(field(crop)?, field(question)?),
            worker_id: field(worker)?.to_string(),
            start_time,
            duration: dur,
            response: resp,
            day: field(day)?.to_string(),
        });
    }
    Ok(out)
}

pub fn read_log_path(path: &Path) -> Result<Vec<RepeatRecord>> {
    read_log(BufReader::new(File::open(path)?))
}

/// Writes records in the canonical `(crop, question, start, worker)` order.
pub fn write_log<W: Write>(writer: W, records: &[RepeatRecord]) -> Result<()> {
    let mut order: Vec<&RepeatRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        (&a.task.crop_id, &a.task.question_id, a.start_time, &a.worker_id).cmp(&(
            &b.task.crop_id,
            &b.task.question_id,
            b.start_time,
            &b.worker_id,
        ))
    });
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(LOG_HEADER)?;
    for r in order {
        w.write_record([
            format!("{}:{}", r.task.crop_id, r.task.question_id).as_str(),
            &r.task.crop_id,
            &r.task.question_id,
            &r.worker_id,
            &r.start_time.to_string(),
            &r.duration.to_string(),
            r.response.as_str(),
            &r.day,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_log_path(path: &Path, records: &[RepeatRecord]) -> Result<()> {
    write_log(BufWriter::new(File::create(path)?), records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::rec;
    use proptest::prelude::*;

    #[test]
    fn day_label_utc_and_offset() {
        assert_eq!(day_label(1_674_000_000, 0), "2023-01-18");
        assert_eq!(day_label(1_674_000_000 - 1, 0), "2023-01-17");
        assert_eq!(day_label(1_674_000_000 - 3_600, 7_200), "2023-01-18");
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "task_id,crop_id,question_id,worker_id,start_time_s,duration_s,response,day\n\
                    a:q,a,q,w1,10,0.9,yes,d\n\
                    a:q,a,q,w2,11,0.9,maybe,d\n";
        match read_log(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("maybe"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "crop_id,question_id\n";
        assert!(matches!(read_log(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let text = "task_id,crop_id,question_id,worker_id,start_time_s,duration_s,response,day\n\
                    a:q,a,q,w1,ten,0.9,yes,d\n";
        assert!(matches!(read_log(text.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn write_then_read_is_canonical(raw in prop::collection::vec((0u8..3, 0u8..2, 0u8..4, 0i64..100_000, 0u8..3, 0.0f64..5.0), 0..40)) {
            let records: Vec<RepeatRecord> = raw.into_iter().map(|(c, q, w, t, r, d)| {
                let mut x = rec(&format!("c{c}"), &format!("q{q}"), &format!("w{w}"), t,
                    [Response::Yes, Response::No, Response::CantSolve][r as usize]);
                x.duration = d;
                x
            }).collect();
            let mut buf = Vec::new();
            write_log(&mut buf, &records).unwrap();
            let back = read_log(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), records.len());
            let mut again = Vec::new();
            write_log(&mut again, &back).unwrap();
            prop_assert_eq!(buf, again);
            let mut sorted = records.clone();
            sorted.sort_by(|a, b| (&a.task, a.start_time, &a.worker_id).cmp(&(&b.task, b.start_time, &b.worker_id)));
            for (a, b) in sorted.iter().zip(&back) {
                prop_assert_eq!(a.duration, b.duration);
                prop_assert_eq!(&a.task, &b.task);
            }
        }
    }
}
