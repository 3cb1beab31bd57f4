use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_pruning_simulation, PruneMode, PrunePolicy, Recalibration, SimulationOutput};
use crate::annotation::{majority_votes, MajorityOutcome, RepeatRecord, TaskKey, Winner};
use crate::error::Result;
use crate::glm::FitSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub prune_rate: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub flipped_tasks: usize,
    /// Tasks with a decisive counterfactual winner; accuracy is over these.
    pub tasks: usize,
    /// Tasks whose unpruned vote is itself a tie.
    pub undetermined_tasks: usize,
    pub total_planned: usize,
    pub retained: usize,
    pub pruned: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PrunePolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub refits: usize,
    #[serde(default)]
    pub degenerate_refits: usize,
}

fn opposite(w: Winner) -> Winner {
    match w {
        Winner::Yes => Winner::No,
        Winner::No => Winner::Yes,
        Winner::Tie => Winner::Tie,
    }
}

/// Compares task winners on the retained votes with the counterfactual
/// winners on all votes.
pub fn evaluate(
    retained: &[RepeatRecord],
    counterfactual: &BTreeMap<TaskKey, MajorityOutcome>,
    total_planned: usize,
) -> EvalReport {
    let after = majority_votes(retained);
    let (mut tasks, mut undetermined, mut matches) = (0, 0, 0);
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (task, cf) in counterfactual {
        if cf.winner == Winner::Tie {
            undetermined += 1;
            continue;
        }
        tasks += 1;
        let got = after.get(task).map_or(Winner::Tie, |o| o.winner);
        if got == cf.winner {
            matches += 1;
        }
        let predicted = if got == Winner::Tie { opposite(cf.winner) } else { got };
        match (predicted == Winner::Yes, cf.winner == Winner::Yes) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    let f1 = if tp + fp + fnn == 0 { 1.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fnn) as f64 };
    let retained_n = retained.len();
    EvalReport {
        prune_rate: if total_planned == 0 { 0.0 } else { 1.0 - retained_n as f64 / total_planned as f64 },
        accuracy: if tasks == 0 { 1.0 } else { matches as f64 / tasks as f64 },
        f1,
        flipped_tasks: tasks - matches,
        tasks,
        undetermined_tasks: undetermined,
        total_planned,
        retained: retained_n,
        pruned: total_planned.saturating_sub(retained_n),
        policy: None,
        seed: None,
        refits: 0,
        degenerate_refits: 0,
    }
}

/// Runs one policy and evaluates it against the full log.
pub fn run_policy(
    records: &[RepeatRecord],
    policy: &PrunePolicy,
    settings: &FitSettings,
) -> Result<(SimulationOutput, EvalReport)> {
    let out = run_pruning_simulation(records, policy, settings)?;
    let cf = majority_votes(records);
    let mut report = evaluate(&out.retained, &cf, records.len());
    report.policy = Some(policy.clone());
    report.refits = out.trace.len();
    report.degenerate_refits = out.degenerate_refits();
    Ok((out, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub delta_hours: Recalibration,
    pub mode: PruneMode,
    pub prune_rate: f64,
    pub accuracy: f64,
    pub f1: f64,
}

/// Evaluates every policy on the current rayon pool; rows come back in
/// grid order.
pub fn sweep(records: &[RepeatRecord], grid: &[PrunePolicy], settings: &FitSettings) -> Result<Vec<SweepRow>> {
    grid.par_iter()
        .map(|p| {
            let (_, r) = run_policy(records, p, settings)?;
            Ok(SweepRow {
                theta: p.effective_theta(),
                delta_hours: p.delta,
                mode: p.mode,
                prune_rate: r.prune_rate,
                accuracy: r.accuracy,
                f1: r.f1,
            })
        })
        .collect()
}
