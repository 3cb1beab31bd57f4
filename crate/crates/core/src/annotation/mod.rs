//! Annotation logs, majority-vote aggregation, minority-report flagging and
//! activity sessionization.

mod log_csv;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use log_csv::{day_label, read_log, read_log_path, write_log, write_log_path, LOG_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Yes,
    No,
    CantSolve,
}

impl Response {
    pub fn as_str(self) -> &'static str {
        match self {
            Response::Yes => "yes",
            Response::No => "no",
            Response::CantSolve => "cant_solve",
        }
    }
}

impl std::str::FromStr for Response {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "yes" => Ok(Response::Yes),
            "no" => Ok(Response::No),
            "cant_solve" => Ok(Response::CantSolve),
            other => Err(format!("unknown response {other:?} (expected yes, no or cant_solve)")),
        }
    }
}

/// A (crop, question) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskKey {
    pub crop_id: String,
    pub question_id: String,
}

impl TaskKey {
    pub fn new(crop_id: impl Into<String>, question_id: impl Into<String>) -> Self {
        Self { crop_id: crop_id.into(), question_id: question_id.into() }
    }
}

impl fmt::Display for TaskKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.crop_id, self.question_id)
    }
}

/// One executed repeat of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub task: TaskKey,
    pub worker_id: String,
    /// Seconds since the Unix epoch.
    pub start_time: i64,
    pub duration: f64,
    pub response: Response,
    pub day: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Yes,
    No,
    Tie,
}

impl Winner {
    fn from_counts(yes: usize, no: usize) -> Self {
        match yes.cmp(&no) {
            std::cmp::Ordering::Greater => Winner::Yes,
            std::cmp::Ordering::Less => Winner::No,
            std::cmp::Ordering::Equal => Winner::Tie,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Winner::Yes => "yes",
            Winner::No => "no",
            Winner::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityOutcome {
    pub task: TaskKey,
    pub yes_count: usize,
    pub no_count: usize,
    pub cant_solve_count: usize,
    pub winner: Winner,
}

impl MajorityOutcome {
    pub fn total(&self) -> usize {
        self.yes_count + self.no_count + self.cant_solve_count
    }
}

/// Aggregates the repeats of a single task. `CantSolve` votes are tallied but
/// never compete for the win.
pub fn majority_vote(records: &[RepeatRecord]) -> Result<MajorityOutcome> {
    let first = records.first().ok_or(Error::NoVotes)?;
    majority_vote_iter(first.task.clone(), records.iter())
}

fn majority_vote_iter<'a>(task: TaskKey, records: impl Iterator<Item = &'a RepeatRecord>) -> Result<MajorityOutcome> {
    let (mut yes, mut no, mut cant) = (0, 0, 0);
    let mut any = false;
    for r in records {
        if r.task != task {
            return Err(Error::HeterogeneousTask { expected: task.to_string(), found: r.task.to_string() });
        }
        any = true;
        match r.response {
            Response::Yes => yes += 1,
            Response::No => no += 1,
            Response::CantSolve => cant += 1,
        }
    }
    if !any {
        return Err(Error::NoVotes);
    }
    Ok(MajorityOutcome {
        task,
        yes_count: yes,
        no_count: no,
        cant_solve_count: cant,
        winner: Winner::from_counts(yes, no),
    })
}

/// Majority vote of every task present in `records`.
pub fn majority_votes<'a, I>(records: I) -> BTreeMap<TaskKey, MajorityOutcome>
where
    I: IntoIterator<Item = &'a RepeatRecord>,
{
    let mut tallies: HashMap<&TaskKey, [usize; 3]> = HashMap::new();
    for r in records {
        let t = tallies.entry(&r.task).or_default();
        match r.response {
            Response::Yes => t[0] += 1,
            Response::No => t[1] += 1,
            Response::CantSolve => t[2] += 1,
        }
    }
    tallies
        .into_iter()
        .map(|(task, [yes, no, cant])| {
            (
                task.clone(),
                MajorityOutcome {
                    task: task.clone(),
                    yes_count: yes,
                    no_count: no,
                    cant_solve_count: cant,
                    winner: Winner::from_counts(yes, no),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinorityFlag {
    pub record_ref: usize,
    pub is_minority: bool,
}

/// Minority status of a single response given its task's winner. Ties flag
/// every decisive vote.
#[inline]
pub fn is_minority(response: Response, winner: Winner) -> bool {
    match (response, winner) {
        (Response::CantSolve, _) => true,
        (_, Winner::Tie) => true,
        (Response::Yes, Winner::Yes) | (Response::No, Winner::No) => false,
        _ => true,
    }
}

pub fn flag_minorities(
    records: &[RepeatRecord],
    outcomes: &BTreeMap<TaskKey, MajorityOutcome>,
) -> Result<Vec<MinorityFlag>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let outcome = outcomes.get(&r.task).ok_or_else(|| Error::MissingOutcome(r.task.to_string()))?;
            Ok(MinorityFlag { record_ref: i, is_minority: is_minority(r.response, outcome.winner) })
        })
        .collect()
}

/// Votes and flags in one pass; returns one boolean per record.
pub fn minority_labels(records: &[RepeatRecord]) -> Vec<bool> {
    let outcomes = majority_votes(records);
    records.iter().map(|r| is_minority(r.response, outcomes[&r.task].winner)).collect()
}

/// A run of records by one worker without an inactivity gap longer than the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivitySession {
    pub worker_id: String,
    pub session_start: i64,
    /// `(record index, hours since session start)`, in time order.
    pub members: Vec<(usize, f64)>,
}

pub const DEFAULT_GAP_MINUTES: f64 = 10.0;

/// Splits each worker's records into continuous-activity sessions.
/// Input order does not matter; ties in start time are broken by record index.
pub fn sessionize(records: &[RepeatRecord], gap_threshold_minutes: f64) -> Result<Vec<ActivitySession>> {
    if !(gap_threshold_minutes > 0.0) {
        return Err(Error::InvalidArgument(format!("gap threshold must be positive, got {gap_threshold_minutes}")));
    }
    let gap_s = gap_threshold_minutes * 60.0;
    let mut by_worker: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_worker.entry(r.worker_id.as_str()).or_default().push(i);
    }
    let mut sessions = Vec::new();
    for (worker, mut idx) in by_worker {
        idx.sort_by_key(|&i| (records[i].start_time, i));
        let mut current: Option<ActivitySession> = None;
        let mut prev = i64::MIN;
        for i in idx {
            let s = records[i].start_time;
            let split = match current {
                None => true,
                Some(_) => (s - prev) as f64 > gap_s,
            };
            if split {
                if let Some(done) = current.take() {
                    sessions.push(done);
                }
                current =
                    Some(ActivitySession { worker_id: worker.to_string(), session_start: s, members: Vec::new() });
            }
            let sess = current.as_mut().expect("session open");
            sess.members.push((i, (s - sess.session_start) as f64 / 3600.0));
            prev = s;
        }
        sessions.extend(current);
    }
    Ok(sessions)
}

/// Activity hours aligned with `records` (0 for records not covered).
pub fn activity_hours(n_records: usize, sessions: &[ActivitySession]) -> Vec<f64> {
    let mut t = vec![0.0; n_records];
    for s in sessions {
        for &(i, h) in &s.members {
            if i < n_records {
                t[i] = h;
            }
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Worker,
    Crop,
    /// Wall-clock hour of day (UTC) of the start time.
    Hour,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRate {
    pub group: String,
    pub records: usize,
    pub minorities: usize,
    pub rate: f64,
}

pub fn disagreement_rates(records: &[RepeatRecord], flags: &[bool], group_by: GroupBy) -> Result<Vec<GroupRate>> {
    if flags.len() != records.len() {
        return Err(Error::InvalidArgument(format!("{} flags for {} records", flags.len(), records.len())));
    }
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (r, &f) in records.iter().zip(flags) {
        let key = match group_by {
            GroupBy::Worker => r.worker_id.clone(),
            GroupBy::Crop => r.task.crop_id.clone(),
            GroupBy::Hour => format!("{:02}", r.start_time.rem_euclid(86_400) / 3_600),
        };
        let g = groups.entry(key).or_default();
        g.0 += 1;
        g.1 += f as usize;
    }
    Ok(groups
        .into_iter()
        .map(|(group, (n, m))| GroupRate { group, records: n, minorities: m, rate: m as f64 / n as f64 })
        .collect())
}

/// Overall minority fraction.
pub fn overall_rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

#[cfg(test)]
pub(crate) fn rec(crop: &str, q: &str, worker: &str, t: i64, response: Response) -> RepeatRecord {
    RepeatRecord {
        task: TaskKey::new(crop, q),
        worker_id: worker.to_string(),
        start_time: t,
        duration: 0.91,
        response,
        day: day_label(t, 0),
    }
}
