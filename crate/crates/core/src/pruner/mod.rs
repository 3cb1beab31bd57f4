//! Interval replay of an executed annotation log that prunes assignments
//! whose predicted minority probability exceeds a threshold.

mod eval;
mod io;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::annotation::{is_minority, majority_votes, RepeatRecord, TaskKey};
use crate::error::{Error, Result};
use crate::glm::{build_design, fit_logistic_warm, DesignSpec, FitSettings, FittedModel, PredictContext};

pub use eval::{evaluate, run_policy, sweep, EvalReport, SweepRow};
pub use io::{read_decision_log, read_sweep_csv, write_decision_log, write_sweep_csv, DECISION_HEADER, SWEEP_HEADER};

const SECONDS_PER_DAY: i64 = 86_400;

/// Time between model refits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recalibration {
    Hours(f64),
    /// Fit once after warm-up and never again.
    Infinite,
}

impl Recalibration {
    fn seconds(self) -> Option<f64> {
        match self {
            Self::Hours(h) => Some(h * 3600.0),
            Self::Infinite => None,
        }
    }

    pub fn hours(self) -> f64 {
        match self {
            Self::Hours(h) => h,
            Self::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Recalibration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Hours(h) => write!(f, "{h}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Recalibration {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        if matches!(t.as_str(), "inf" | "infinite" | "infinity" | "none" | "∞") {
            return Ok(Self::Infinite);
        }
        let h: f64 = t.parse().map_err(|_| format!("bad recalibration interval {s:?}"))?;
        if h.is_infinite() && h > 0.0 {
            Ok(Self::Infinite)
        } else {
            Ok(Self::Hours(h))
        }
    }
}

impl Serialize for Recalibration {
    fn serialize<Z: Serializer>(&self, s: Z) -> std::result::Result<Z::Ok, Z::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Recalibration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PruneMode {
    Predictive,
    /// Prune every assignment that passes the first two rules.
    Np,
    /// Score unseen workers with a zero effect instead of retaining them.
    Aw,
}

impl PruneMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Predictive => "predictive",
            Self::Np => "np",
            Self::Aw => "aw",
        }
    }
}

impl FromStr for PruneMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "predictive" | "pred" | "p" => Ok(Self::Predictive),
            "np" => Ok(Self::Np),
            "aw" => Ok(Self::Aw),
            _ => Err(format!("unknown mode {s:?} (expected predictive, np or aw)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunePolicy {
    pub theta: f64,
    pub delta: Recalibration,
    pub tau_hours: f64,
    pub mode: PruneMode,
    pub min_retained_per_task: usize,
    pub design: DesignSpec,
}

impl PrunePolicy {
    pub fn new(theta: f64, delta: Recalibration, tau_hours: f64, mode: PruneMode) -> Self {
        Self { theta, delta, tau_hours, mode, min_retained_per_task: 1, design: DesignSpec::pruning() }
    }

    /// The threshold actually applied: NP acts as θ = 0.
    pub fn effective_theta(&self) -> f64 {
        if self.mode == PruneMode::Np {
            0.0
        } else {
            self.theta
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..1.0).contains(&self.theta) {
            problems.push(format!("theta must be in [0, 1) (got {})", self.theta));
        }
        if let Recalibration::Hours(h) = self.delta {
            if !(h > 0.0 && h.is_finite()) {
                problems.push(format!("delta must be positive or inf (got {h})"));
            }
        }
        if !(self.tau_hours >= 0.0 && self.tau_hours.is_finite()) {
            problems.push(format!("tau must be a finite nonnegative number of hours (got {})", self.tau_hours));
        }
        if self.min_retained_per_task == 0 {
            problems.push("min_retained must be at least 1".into());
        }
        if self.design.needs_activity() {
            problems.push("the pruning model cannot use activity covariates".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(problems))
        }
    }
}

/// Replay order: by start time, then task, then worker.
pub fn plan_order(records: &[RepeatRecord]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| {
        let (x, y) = (&records[a], &records[b]);
        (x.start_time, &x.task, &x.worker_id).cmp(&(y.start_time, &y.task, &y.worker_id))
    });
    idx
}

/// Midnight UTC of the day holding the earliest time.
pub fn plan_origin(times: &[i64]) -> Option<i64> {
    times.iter().min().map(|t| t.div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY)
}

/// Hours from the origin to the last scheduled time.
pub fn horizon_hours(times: &[i64]) -> f64 {
    match (plan_origin(times), times.iter().max()) {
        (Some(o), Some(&last)) => (last - o) as f64 / 3600.0,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalBucket {
    /// 0 for the warm-up bucket; post-warm-up buckets count from 1.
    pub index: usize,
    pub warm_up: bool,
    /// Positions into the scheduled-time slice, in input order.
    pub members: Vec<usize>,
}

/// Buckets scheduled times (seconds, sorted ascending). Times up to
/// `origin + τ` form the warm-up bucket; later ones fall into buckets of
/// length Δ measured from the end of warm-up. Empty buckets are omitted.
pub fn partition_intervals(times: &[i64], delta: Recalibration, tau_hours: f64) -> Vec<IntervalBucket> {
    let Some(origin) = plan_origin(times) else {
        return Vec::new();
    };
    let warm_end = origin as f64 + tau_hours * 3600.0;
    let mut warm = Vec::new();
    let mut post: Vec<(u64, Vec<usize>)> = Vec::new();
    for (pos, &s) in times.iter().enumerate() {
        let s = s as f64;
        if s <= warm_end {
            warm.push(pos);
            continue;
        }
        let key = match delta.seconds() {
            Some(d) => ((s - warm_end) / d).floor() as u64,
            None => 0,
        };
        match post.last_mut() {
            Some((k, m)) if *k == key => m.push(pos),
            _ => post.push((key, vec![pos])),
        }
    }
    let mut out = Vec::with_capacity(post.len() + 1);
    if !warm.is_empty() {
        out.push(IntervalBucket { index: 0, warm_up: true, members: warm });
    }
    for (i, (_, members)) in post.into_iter().enumerate() {
        out.push(IntervalBucket { index: i + 1, warm_up: false, members });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Retained,
    Pruned,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Retained => "retained",
            Self::Pruned => "pruned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    WarmUp,
    UnseenWorker,
    UnseenTask,
    MinRetainedFloor,
    BelowThreshold,
    AboveThreshold,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::WarmUp => "warm_up",
            Self::UnseenWorker => "unseen_worker",
            Self::UnseenTask => "unseen_task",
            Self::MinRetainedFloor => "min_retained_floor",
            Self::BelowThreshold => "below_threshold",
            Self::AboveThreshold => "above_threshold",
        }
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            Self::WarmUp,
            Self::UnseenWorker,
            Self::UnseenTask,
            Self::MinRetainedFloor,
            Self::BelowThreshold,
            Self::AboveThreshold,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown rule {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionEntry {
    pub task: TaskKey,
    pub worker_id: String,
    pub scheduled_s: i64,
    pub decision: Decision,
    pub rule: Rule,
    pub predicted_p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuleOutcome {
    pub decision: Decision,
    pub rule: Rule,
    pub predicted_p: Option<f64>,
}

/// Mutable state of one replay.
#[derive(Debug, Clone, Default)]
pub struct SimState {
    /// Record indices of the observed set, in execution order.
    pub observed: Vec<usize>,
    pub seen_workers: HashSet<String>,
    pub seen_tasks: HashSet<TaskKey>,
    pub current_model: Option<FittedModel<f64>>,
    pub interval: usize,
    retained_per_task: HashMap<TaskKey, usize>,
    remaining_per_task: HashMap<TaskKey, usize>,
}

impl SimState {
    /// `planned` lists every assignment that will be decided, so the floor
    /// rule knows how many chances each task has left.
    pub fn new<'a>(planned: impl IntoIterator<Item = &'a RepeatRecord>) -> Self {
        let mut s = Self::default();
        for r in planned {
            *s.remaining_per_task.entry(r.task.clone()).or_default() += 1;
        }
        s
    }

    pub fn retained_for(&self, task: &TaskKey) -> usize {
        self.retained_per_task.get(task).copied().unwrap_or(0)
    }

    fn observe(&mut self, idx: usize, r: &RepeatRecord) {
        self.observed.push(idx);
        self.seen_workers.insert(r.worker_id.clone());
        self.seen_tasks.insert(r.task.clone());
    }

    fn count_retained(&mut self, task: &TaskKey) {
        *self.retained_per_task.entry(task.clone()).or_default() += 1;
    }

    fn consume(&mut self, task: &TaskKey) {
        if let Some(n) = self.remaining_per_task.get_mut(task) {
            *n = n.saturating_sub(1);
        }
    }
}

/// Applies the decision rules in order to one post-warm-up assignment.
pub fn decide(r: &RepeatRecord, state: &SimState, policy: &PrunePolicy) -> Result<RuleOutcome> {
    let retain = |rule| Ok(RuleOutcome { decision: Decision::Retained, rule, predicted_p: None });
    if policy.mode != PruneMode::Aw && !state.seen_workers.contains(&r.worker_id) {
        return retain(Rule::UnseenWorker);
    }
    if !state.seen_tasks.contains(&r.task) {
        return retain(Rule::UnseenTask);
    }
    // Votes this task can still end with if this one is dropped.
    let remaining_after = state.remaining_per_task.get(&r.task).copied().unwrap_or(1).saturating_sub(1);
    if state.retained_for(&r.task) + remaining_after < policy.min_retained_per_task {
        return retain(Rule::MinRetainedFloor);
    }
    if policy.mode == PruneMode::Np {
        return Ok(RuleOutcome { decision: Decision::Pruned, rule: Rule::AboveThreshold, predicted_p: None });
    }
    let model = state.current_model.as_ref().ok_or(Error::ModelNotCalibrated)?;
    let p = model.predict(&PredictContext { task: &r.task, worker_id: &r.worker_id, t: 0.0, day: &r.day });
    Ok(if p > policy.theta {
        RuleOutcome { decision: Decision::Pruned, rule: Rule::AboveThreshold, predicted_p: Some(p) }
    } else {
        RuleOutcome { decision: Decision::Retained, rule: Rule::BelowThreshold, predicted_p: Some(p) }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefitStatus {
    Fitted {
        converged: bool,
        iterations: usize,
    },
    /// Only one class among the observed flags; the previous model is kept.
    DegenerateRefit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefitRecord {
    /// Interval after which the fit ran (0 = end of warm-up).
    pub after_interval: usize,
    pub rows: usize,
    pub positives: usize,
    pub status: RefitStatus,
    /// Wall-clock seconds; informational only and not serialized, so trace
    /// files stay reproducible.
    #[serde(skip)]
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub retained: Vec<RepeatRecord>,
    /// One entry per assignment, in replay order.
    pub decisions: Vec<DecisionEntry>,
    pub trace: Vec<RefitRecord>,
    pub intervals: usize,
}

impl SimulationOutput {
    pub fn pruned(&self) -> usize {
        self.decisions.iter().filter(|d| d.decision == Decision::Pruned).count()
    }

    pub fn degenerate_refits(&self) -> usize {
        self.trace.iter().filter(|t| t.status == RefitStatus::DegenerateRefit).count()
    }
}

fn refit(
    records: &[RepeatRecord],
    state: &mut SimState,
    policy: &PrunePolicy,
    settings: &FitSettings,
    after: usize,
) -> Result<RefitRecord> {
    let started = Instant::now();
    let observed: Vec<RepeatRecord> = state.observed.iter().map(|&i| records[i].clone()).collect();
    let votes = majority_votes(&observed);
    let flags: Vec<bool> = observed.iter().map(|r| is_minority(r.response, votes[&r.task].winner)).collect();
    let positives = flags.iter().filter(|&&f| f).count();
    let status = if positives == 0 || positives == flags.len() {
        RefitStatus::DegenerateRefit
    } else {
        let design = build_design(&observed, &flags, None, &policy.design)?;
        let model = fit_logistic_warm(&design, settings, state.current_model.as_ref())?;
        let status = RefitStatus::Fitted { converged: model.meta.converged, iterations: model.meta.iterations };
        state.current_model = Some(model);
        status
    };
    Ok(RefitRecord {
        after_interval: after,
        rows: flags.len(),
        positives,
        status,
        elapsed_s: started.elapsed().as_secs_f64(),
    })
}

/// Replays a fully executed log under `policy`: warm-up rows are all kept,
/// then each interval is decided with the current model and seen sets,
/// retained rows join the observed set when the interval closes, and the
/// model is refit on minority flags recomputed from the observed set alone.
pub fn run_pruning_simulation(
    records: &[RepeatRecord],
    policy: &PrunePolicy,
    settings: &FitSettings,
) -> Result<SimulationOutput> {
    policy.validate()?;
    let order = plan_order(records);
    let times: Vec<i64> = order.iter().map(|&i| records[i].start_time).collect();
    let horizon = horizon_hours(&times);
    if policy.tau_hours > horizon {
        return Err(Error::InvalidConfig(vec![format!(
            "tau ({} h) exceeds the annotation horizon ({horizon} h)",
            policy.tau_hours
        )]));
    }
    let buckets = partition_intervals(&times, policy.delta, policy.tau_hours);
    let post_warm = buckets.iter().filter(|b| !b.warm_up).flat_map(|b| b.members.iter().map(|&p| &records[order[p]]));
    let mut state = SimState::new(post_warm);
    let mut decisions = Vec::with_capacity(records.len());
    let mut trace = Vec::new();
    let n_buckets = buckets.len();

    for (bi, bucket) in buckets.iter().enumerate() {
        state.interval = bucket.index;
        let mut pending = Vec::new();
        for &pos in &bucket.members {
            let idx = order[pos];
            let r = &records[idx];
            let outcome = if bucket.warm_up {
                RuleOutcome { decision: Decision::Retained, rule: Rule::WarmUp, predicted_p: None }
            } else {
                let o = decide(r, &state, policy)?;
                state.consume(&r.task);
                o
            };
            if outcome.decision == Decision::Retained {
                state.count_retained(&r.task);
                pending.push(idx);
            }
            decisions.push(DecisionEntry {
                task: r.task.clone(),
                worker_id: r.worker_id.clone(),
                scheduled_s: r.start_time,
                decision: outcome.decision,
                rule: outcome.rule,
                predicted_p: outcome.predicted_p,
            });
        }
        // The observed set only grows between intervals.
        for idx in pending {
            state.observe(idx, &records[idx]);
        }
        let last = bi + 1 == n_buckets;
        if policy.mode != PruneMode::Np && !last {
            trace.push(refit(records, &mut state, policy, settings, bucket.index)?);
        }
    }
    let mut kept = state.observed.clone();
    kept.sort_unstable();
    let retained = kept.into_iter().map(|i| records[i].clone()).collect();
    Ok(SimulationOutput { retained, decisions, trace, intervals: n_buckets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::{rec, Response};

    #[test]
    fn partition_examples() {
        let b = partition_intervals(&[1800, 5400], Recalibration::Hours(1.0), 0.0);
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|x| !x.warm_up && x.members.len() == 1));
        let b = partition_intervals(&[60, 120, 3000], Recalibration::Hours(1.0), 0.0);
        assert_eq!(b.len(), 1);
        let times: Vec<i64> = (0..20).map(|i| i * 1800 + 1).collect();
        let b = partition_intervals(&times, Recalibration::Infinite, 3.0);
        assert_eq!(b.len(), 2);
        assert!(b[0].warm_up && b[0].members.iter().all(|&p| times[p] <= 3 * 3600));
        assert!(b[1].members.iter().all(|&p| times[p] > 3 * 3600));
        assert!(partition_intervals(&[], Recalibration::Infinite, 1.0).is_empty());
        // Empty hours in between are skipped, not emitted.
        let b = partition_intervals(&[100, 50_000], Recalibration::Hours(1.0), 0.0);
        assert_eq!(b.iter().map(|x| x.index).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn origin_is_utc_midnight() {
        assert_eq!(plan_origin(&[90_000, 200_000]), Some(86_400));
        assert_eq!(horizon_hours(&[86_400 + 7200]), 2.0);
    }

    fn seen_state(records: &[RepeatRecord]) -> SimState {
        let mut s = SimState::new(records);
        for (i, r) in records.iter().enumerate() {
            s.observe(i, r);
            s.count_retained(&r.task);
        }
        s
    }

    fn const_model(intercept: f64) -> FittedModel<f64> {
        let r = vec![rec("c", "q", "w", 0, Response::Yes), rec("c", "q", "v", 1, Response::No)];
        let d = build_design(&r, &[true, false], None, &DesignSpec::intercept_only()).unwrap();
        let mut m = crate::glm::fit_logistic(&d, &FitSettings::default()).unwrap();
        m.intercept = intercept;
        m
    }

    #[test]
    fn decide_examples() {
        let warm = vec![rec("c1", "q1", "w1", 0, Response::Yes)];
        let mut state = seen_state(&warm);
        let new_worker = rec("c1", "q1", "w2", 10, Response::Yes);
        let pol = PrunePolicy::new(0.99, Recalibration::Hours(1.0), 0.0, PruneMode::Predictive);
        let o = decide(&new_worker, &state, &pol).unwrap();
        assert_eq!((o.decision, o.rule), (Decision::Retained, Rule::UnseenWorker));

        let again = rec("c1", "q1", "w1", 10, Response::Yes);
        let np = PrunePolicy { mode: PruneMode::Np, ..pol.clone() };
        let o = decide(&again, &state, &np).unwrap();
        assert_eq!((o.decision, o.predicted_p), (Decision::Pruned, None));

        assert!(matches!(decide(&again, &state, &pol), Err(Error::ModelNotCalibrated)));
        state.current_model = Some(const_model(crate::scalar::logit(0.95)));
        let o = decide(&again, &state, &pol).unwrap();
        assert_eq!((o.decision, o.rule), (Decision::Retained, Rule::BelowThreshold));
        assert!((o.predicted_p.unwrap() - 0.95).abs() < 1e-12);
        let low = PrunePolicy { theta: 0.9, ..pol.clone() };
        assert_eq!(decide(&again, &state, &low).unwrap().rule, Rule::AboveThreshold);

        let aw = PrunePolicy { mode: PruneMode::Aw, theta: 0.5, ..pol.clone() };
        let o = decide(&new_worker, &state, &aw).unwrap();
        assert_eq!((o.decision, o.rule), (Decision::Pruned, Rule::AboveThreshold));
        let unseen_task = rec("c9", "q1", "w1", 10, Response::Yes);
        assert_eq!(decide(&unseen_task, &state, &aw).unwrap().rule, Rule::UnseenTask);
    }

    #[test]
    fn floor_protects_last_chances() {
        let warm = vec![rec("c1", "q1", "w1", 0, Response::Yes)];
        let mut state = seen_state(&warm);
        let next = rec("c1", "q1", "w1", 10, Response::Yes);
        // One retained vote plus this last planned one: a floor of 2 needs it.
        state.remaining_per_task.insert(next.task.clone(), 1);
        let pol = PrunePolicy {
            min_retained_per_task: 2,
            ..PrunePolicy::new(0.0, Recalibration::Infinite, 0.0, PruneMode::Np)
        };
        assert_eq!(decide(&next, &state, &pol).unwrap().rule, Rule::MinRetainedFloor);
        state.remaining_per_task.insert(next.task.clone(), 2);
        assert_eq!(decide(&next, &state, &pol).unwrap().decision, Decision::Pruned);
    }

    #[test]
    fn policy_validation() {
        let ok = PrunePolicy::new(0.5, Recalibration::Hours(1.0), 36.0, PruneMode::Predictive);
        assert!(ok.validate().is_ok());
        for bad in [
            PrunePolicy { theta: 1.0, ..ok.clone() },
            PrunePolicy { delta: Recalibration::Hours(0.0), ..ok.clone() },
            PrunePolicy { tau_hours: -1.0, ..ok.clone() },
            PrunePolicy { min_retained_per_task: 0, ..ok.clone() },
            PrunePolicy { design: DesignSpec::variant(crate::glm::ModelVariant::A), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
        assert_eq!("inf".parse::<Recalibration>().unwrap(), Recalibration::Infinite);
        assert_eq!("1.5".parse::<Recalibration>().unwrap(), Recalibration::Hours(1.5));
        assert_eq!(PruneMode::from_str("NP").unwrap(), PruneMode::Np);
    }

    fn small_log() -> Vec<RepeatRecord> {
        // Three tasks, three workers, spread over six hours; w3 often disagrees.
        let mut v = Vec::new();
        let mut t = 0;
        for round in 0..4 {
            for c in 0..3 {
                for (w, resp) in [
                    ("w1", Response::Yes),
                    ("w2", Response::Yes),
                    ("w3", if (round + c) % 2 == 0 { Response::No } else { Response::Yes }),
                ] {
                    v.push(rec(&format!("c{c}"), "q1", w, t, resp));
                    t += 600;
                }
            }
        }
        v
    }

    #[test]
    fn tau_at_horizon_prunes_nothing() {
        let log = small_log();
        let times: Vec<i64> = log.iter().map(|r| r.start_time).collect();
        let h = horizon_hours(&times);
        let pol = PrunePolicy::new(0.0, Recalibration::Hours(1.0), h, PruneMode::Np);
        let out = run_pruning_simulation(&log, &pol, &FitSettings::default()).unwrap();
        assert_eq!(out.pruned(), 0);
        assert_eq!(out.retained, log);
        let late = PrunePolicy { tau_hours: h + 0.01, ..pol };
        assert!(matches!(run_pruning_simulation(&log, &late, &FitSettings::default()), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn np_infinite_prunes_seen_pairs_only() {
        let mut log = small_log();
        log.push(rec("c7", "q1", "w1", 5 * 3600, Response::Yes));
        log.push(rec("c7", "q1", "w2", 5 * 3600 + 30, Response::Yes));
        log.push(rec("c7", "q1", "w3", 6 * 3600, Response::No));
        log.push(rec("c0", "q1", "w9", 5 * 3600 + 60, Response::Yes));
        let pol = PrunePolicy::new(0.0, Recalibration::Infinite, 1.0, PruneMode::Np);
        let out = run_pruning_simulation(&log, &pol, &FitSettings::default()).unwrap();
        let warm: Vec<&RepeatRecord> = log.iter().filter(|r| r.start_time <= 3600).collect();
        let expected: Vec<(i64, &str)> = log
            .iter()
            .filter(|r| r.start_time > 3600)
            .filter(|r| warm.iter().any(|w| w.task == r.task) && warm.iter().any(|w| w.worker_id == r.worker_id))
            .map(|r| (r.start_time, r.worker_id.as_str()))
            .collect();
        let pruned: Vec<(i64, &str)> = out
            .decisions
            .iter()
            .filter(|d| d.decision == Decision::Pruned)
            .map(|d| (d.scheduled_s, d.worker_id.as_str()))
            .collect();
        assert_eq!(pruned, expected);
        assert!(out.trace.is_empty());
        assert!(out.decisions.iter().all(|d| d.predicted_p.is_none()));
        assert_eq!(out.retained.len() + out.pruned(), log.len());
    }

    #[test]
    fn predictive_run_records_refits_and_conserves() {
        let log = small_log();
        let pol = PrunePolicy::new(0.5, Recalibration::Hours(1.0), 0.5, PruneMode::Predictive);
        let out = run_pruning_simulation(&log, &pol, &FitSettings::default()).unwrap();
        assert_eq!(out.decisions.len(), log.len());
        assert_eq!(out.retained.len() + out.pruned(), log.len());
        assert_eq!(out.trace.len(), out.intervals - 1);
        assert!(out.decisions.iter().filter(|d| d.scheduled_s <= 1800).all(|d| d.rule == Rule::WarmUp));
        let scored = out.decisions.iter().filter(|d| matches!(d.rule, Rule::AboveThreshold | Rule::BelowThreshold));
        assert!(scored.clone().count() > 0);
        assert!(scored.clone().all(|d| d.predicted_p.is_some()));
    }

    #[test]
    fn unanimous_warm_up_is_degenerate() {
        let log: Vec<RepeatRecord> = (0..12)
            .map(|i| rec(&format!("c{}", i % 2), "q1", &format!("w{}", i % 3), i * 900, Response::Yes))
            .collect();
        let pol = PrunePolicy::new(0.5, Recalibration::Hours(1.0), 1.0, PruneMode::Predictive);
        let err = run_pruning_simulation(&log, &pol, &FitSettings::default()).unwrap_err();
        assert!(matches!(err, Error::ModelNotCalibrated));
        let np = PrunePolicy { mode: PruneMode::Np, ..pol };
        assert!(run_pruning_simulation(&log, &np, &FitSettings::default()).is_ok());
    }
}
