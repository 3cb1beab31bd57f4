//! Synthetic annotation logs.
//!
//! Every (crop, question) task has a latent true label. A worker answers
//! wrongly with probability `inv_logit(intercept + u_i + v_j + β₁t + β₂t² +
//! question + day)`, where `t` is hours into the worker's shift; minority
//! status then falls out of the realized majority vote.

mod config;

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::annotation::{day_label, RepeatRecord, Response, TaskKey};
use crate::error::{Error, Result};
use crate::scalar::inv_logit;

pub use config::{GenConfig, RepeatRange};

const SECONDS_PER_DAY: i64 = 86_400;

// Independent random streams so that changing one stage does not perturb
// the draws of another.
const STREAM_POPULATION: u64 = 1;
const STREAM_PLAN: u64 = 2;
const STREAM_VOTES: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Shift {
    pub start: i64,
    pub hours: f64,
}

impl Shift {
    pub fn end(&self) -> i64 {
        self.start + (self.hours * 3600.0).round() as i64
    }

    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerProfile {
    pub worker_id: String,
    /// Log-odds skill effect `v_j` (higher means more errors).
    pub skill: f64,
    /// Sorted, non-overlapping.
    pub shift_plan: Vec<Shift>,
}

impl WorkerProfile {
    pub fn shift_at(&self, t: i64) -> Option<&Shift> {
        let idx = self.shift_plan.partition_point(|s| s.start <= t);
        idx.checked_sub(1).map(|i| &self.shift_plan[i]).filter(|s| s.contains(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropProfile {
    pub crop_id: String,
    /// Log-odds ambiguity effect `u_i`.
    pub ambiguity: f64,
    /// Latent truth, one per question; always `Yes` or `No`.
    pub true_labels: Vec<Response>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub task: TaskKey,
    pub question_index: usize,
    pub worker_id: String,
    pub scheduled: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssignmentPlan {
    /// Ordered by scheduled time.
    pub assignments: Vec<Assignment>,
}

impl AssignmentPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

pub fn worker_id(j: usize) -> String {
    format!("w{:03}", j + 1)
}

pub fn crop_id(i: usize) -> String {
    format!("c{:05}", i + 1)
}

pub fn question_id(k: usize) -> String {
    format!("q{}", k + 1)
}

fn normal(sd: f64) -> Normal<f64> {
    Normal::new(0.0, sd).expect("validated standard deviation")
}

/// Draws worker skills, shift plans, crop ambiguities and true labels.
pub fn sample_population(config: &GenConfig, seed: u64) -> Result<(Vec<WorkerProfile>, Vec<CropProfile>)> {
    config.validate()?;
    let mut rng = rng_for(seed, STREAM_POPULATION);
    let days = config.days;

    let skill = normal(config.sigma_v);
    let mut join_day = Vec::with_capacity(config.workers);
    let mut offsets = Vec::with_capacity(config.workers);
    let mut workers: Vec<WorkerProfile> = (0..config.workers)
        .map(|j| {
            let v = skill.sample(&mut rng);
            let late = days > 1 && rng.random::<f64>() < config.late_join_fraction;
            join_day.push(if late { rng.random_range(1..days) } else { 0 });
            let stagger_min = (config.shift_stagger_hours * 60.0).floor() as i64;
            offsets.push(if stagger_min > 0 { rng.random_range(0..stagger_min) * 60 } else { 0 });
            WorkerProfile { worker_id: worker_id(j), skill: v, shift_plan: Vec::new() }
        })
        .collect();

    let needed = config.repeats.max.min(config.workers);
    for d in 0..days {
        let day_start = config.start_epoch + d as i64 * SECONDS_PER_DAY;
        let mut attending: Vec<bool> =
            (0..config.workers).map(|j| join_day[j] <= d && rng.random::<f64>() < config.attendance).collect();
        let mut count = attending.iter().filter(|&&a| a).count();
        if count < needed {
            // Top up thin days, preferring workers who have already joined.
            let mut spare: Vec<usize> = (0..config.workers).filter(|&j| !attending[j]).collect();
            spare.shuffle(&mut rng);
            spare.sort_by_key(|&j| join_day[j] > d);
            for j in spare.into_iter().take(needed - count) {
                attending[j] = true;
                count += 1;
            }
        }
        for (j, w) in workers.iter_mut().enumerate() {
            if attending[j] {
                let start = day_start + (config.shift_start_hour * 3600.0).round() as i64 + offsets[j];
                w.shift_plan.push(Shift { start, hours: config.shift_hours });
            }
        }
    }

    let ambiguity = normal(config.sigma_u);
    let crops = (0..config.crops)
        .map(|i| {
            let u = ambiguity.sample(&mut rng);
            let true_labels = (0..config.questions)
                .map(|_| if rng.random::<f64>() < config.base_yes_rate { Response::Yes } else { Response::No })
                .collect();
            CropProfile { crop_id: crop_id(i), ambiguity: u, true_labels }
        })
        .collect();
    Ok((workers, crops))
}

/// Spreads crops evenly over the simulated days, draws a repeat count per
/// task and distinct workers among that day's attendees, then paces each
/// worker's load evenly through their shift.
pub fn plan_assignments(
    config: &GenConfig,
    workers: &[WorkerProfile],
    crops: &[CropProfile],
    seed: u64,
) -> Result<AssignmentPlan> {
    config.validate()?;
    if workers.len() < config.repeats.max {
        return Err(Error::InsufficientCapacity(format!(
            "{} distinct workers needed per task but only {} exist (shortfall {})",
            config.repeats.max,
            workers.len(),
            config.repeats.max - workers.len()
        )));
    }
    let mut rng = rng_for(seed, STREAM_PLAN);
    let mut crop_order: Vec<usize> = (0..crops.len()).collect();
    crop_order.shuffle(&mut rng);

    let capacity = (config.shift_hours * 3600.0 / config.mean_duration_s).floor() as usize;
    let mut shortfall = 0usize;
    let mut assignments = Vec::new();
    let days = config.days;
    for d in 0..days {
        let day_start = config.start_epoch + d as i64 * SECONDS_PER_DAY;
        let day_end = day_start + SECONDS_PER_DAY;
        let attendees: Vec<(usize, Shift)> = workers
            .iter()
            .enumerate()
            .filter_map(|(j, w)| {
                w.shift_plan.iter().find(|s| s.start >= day_start && s.start < day_end).map(|s| (j, *s))
            })
            .collect();
        let lo = d * crops.len() / days;
        let hi = (d + 1) * crops.len() / days;
        let mut queues: Vec<Vec<(usize, usize)>> = vec![Vec::new(); attendees.len()];
        for &ci in &crop_order[lo..hi] {
            for q in 0..crops[ci].true_labels.len() {
                let n = rng.random_range(config.repeats.min..=config.repeats.max);
                if attendees.len() < n {
                    shortfall += n - attendees.len();
                    continue;
                }
                for a in sample(&mut rng, attendees.len(), n) {
                    queues[a].push((ci, q));
                }
            }
        }
        for ((j, shift), queue) in attendees.iter().zip(queues) {
            if queue.is_empty() {
                continue;
            }
            if queue.len() > capacity {
                shortfall += queue.len() - capacity;
                continue;
            }
            let spacing = shift.hours * 3600.0 / queue.len() as f64;
            for (m, (ci, q)) in queue.into_iter().enumerate() {
                assignments.push(Assignment {
                    task: TaskKey::new(crops[ci].crop_id.clone(), question_id(q)),
                    question_index: q,
                    worker_id: workers[*j].worker_id.clone(),
                    scheduled: shift.start + (m as f64 * spacing).floor() as i64,
                });
            }
        }
    }
    if shortfall > 0 {
        return Err(Error::InsufficientCapacity(format!("{shortfall} repeats could not be scheduled")));
    }
    assignments.sort_by(|a, b| (a.scheduled, &a.worker_id, &a.task).cmp(&(b.scheduled, &b.worker_id, &b.task)));
    Ok(AssignmentPlan { assignments })
}

struct Lookup<'a> {
    workers: HashMap<&'a str, &'a WorkerProfile>,
    crops: HashMap<&'a str, &'a CropProfile>,
}

impl<'a> Lookup<'a> {
    fn new(workers: &'a [WorkerProfile], crops: &'a [CropProfile]) -> Self {
        Self {
            workers: workers.iter().map(|w| (w.worker_id.as_str(), w)).collect(),
            crops: crops.iter().map(|c| (c.crop_id.as_str(), c)).collect(),
        }
    }

    fn resolve(&self, a: &Assignment) -> Result<(&'a WorkerProfile, &'a CropProfile, &'a Shift)> {
        let w = *self
            .workers
            .get(a.worker_id.as_str())
            .ok_or_else(|| Error::UnknownProfile(format!("worker {}", a.worker_id)))?;
        let c = *self
            .crops
            .get(a.task.crop_id.as_str())
            .ok_or_else(|| Error::UnknownProfile(format!("crop {}", a.task.crop_id)))?;
        if a.question_index >= c.true_labels.len() {
            return Err(Error::UnknownProfile(format!("question {} of crop {}", a.task.question_id, c.crop_id)));
        }
        let shift = w
            .shift_at(a.scheduled)
            .ok_or_else(|| Error::InvalidArgument(format!("{} is not on shift at {}", a.worker_id, a.scheduled)))?;
        Ok((w, c, shift))
    }
}

fn day_index(config: &GenConfig, t: i64) -> usize {
    (t - config.start_epoch).div_euclid(SECONDS_PER_DAY).max(0) as usize
}

/// Ex-ante error probability of every planned assignment.
pub fn error_probabilities(
    plan: &AssignmentPlan,
    workers: &[WorkerProfile],
    crops: &[CropProfile],
    config: &GenConfig,
) -> Result<Vec<f64>> {
    let lookup = Lookup::new(workers, crops);
    plan.assignments
        .iter()
        .map(|a| {
            let (w, c, shift) = lookup.resolve(a)?;
            let t = (a.scheduled - shift.start) as f64 / 3600.0;
            let eta = config.error_log_odds(c.ambiguity, w.skill, t, a.question_index, day_index(config, a.scheduled));
            Ok(inv_logit(eta))
        })
        .collect()
}

/// Executes the plan: one response per assignment, in plan order.
pub fn simulate_annotations(
    plan: &AssignmentPlan,
    workers: &[WorkerProfile],
    crops: &[CropProfile],
    config: &GenConfig,
    seed: u64,
) -> Result<Vec<RepeatRecord>> {
    let probs = error_probabilities(plan, workers, crops, config)?;
    let lookup = Lookup::new(workers, crops);
    let mut rng = rng_for(seed, STREAM_VOTES);
    let duration = Exp::new(1.0 / config.mean_duration_s).expect("validated duration");
    plan.assignments
        .iter()
        .zip(probs)
        .map(|(a, p)| {
            let (_, crop, _) = lookup.resolve(a)?;
            let truth = crop.true_labels[a.question_index];
            let wrong = rng.random::<f64>() < p;
            let cant = rng.random::<f64>() < config.cant_solve_prob;
            let secs: f64 = duration.sample(&mut rng);
            let response = match (cant, wrong, truth) {
                (true, _, _) => Response::CantSolve,
                (false, false, t) => t,
                (false, true, Response::Yes) => Response::No,
                (false, true, _) => Response::Yes,
            };
            Ok(RepeatRecord {
                task: a.task.clone(),
                worker_id: a.worker_id.clone(),
                start_time: a.scheduled,
                duration: (secs * 1000.0).round() / 1000.0,
                response,
                day: day_label(a.scheduled, config.tz_offset_s),
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GeneratedLog {
    pub workers: Vec<WorkerProfile>,
    pub crops: Vec<CropProfile>,
    pub plan: AssignmentPlan,
    pub records: Vec<RepeatRecord>,
}

/// Population, plan and votes from `config.seed`.
pub fn generate(config: &GenConfig) -> Result<GeneratedLog> {
    let (workers, crops) = sample_population(config, config.seed)?;
    let plan = plan_assignments(config, &workers, &crops, config.seed)?;
    let records = simulate_annotations(&plan, &workers, &crops, config, config.seed)?;
    Ok(GeneratedLog { workers, crops, plan, records })
}

pub fn write_crop_truth<W: Write>(writer: W, crops: &[CropProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["crop_id", "question_id", "true_label", "u_i"])?;
    for c in crops {
        for (q, label) in c.true_labels.iter().enumerate() {
            w.write_record([c.crop_id.as_str(), &question_id(q), label.as_str(), &c.ambiguity.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_worker_truth<W: Write>(writer: W, workers: &[WorkerProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["worker_id", "v_j"])?;
    for wp in workers {
        w.write_record([wp.worker_id.as_str(), &wp.skill.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
