//! Ridge-penalized, optionally class-balanced logistic regression of
//! minority reports on activity time, question, day, worker and crop.
//!
//! Worker and crop "random effects" are per-level coefficients shrunk by a
//! ridge penalty, which is the posterior mode of a Gaussian random intercept.

mod fit;
mod linalg;
mod metrics;

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{activity_hours, ActivitySession, RepeatRecord, TaskKey};
use crate::error::{Error, Result};
use crate::scalar::{inv_logit, Scalar};

pub use fit::{
    fit_logistic, fit_logistic_warm, flat_coefficients, penalized_gradient, penalized_objective, FitSettings,
};
pub use metrics::{auc, likelihood_ratio_test, pseudo_r2};

/// Which covariate blocks enter the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub include_activity: bool,
    pub include_activity_squared: bool,
    pub include_worker: bool,
    pub include_crop: bool,
    pub include_question: bool,
    pub include_day: bool,
    pub ridge_lambda_worker: f64,
    pub ridge_lambda_crop: f64,
    pub class_balanced: bool,
}

/// The model ladder: controls only, then activity, then worker and/or crop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Base,
    A,
    Aw,
    Ac,
    Awc,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [Self::Base, Self::A, Self::Aw, Self::Ac, Self::Awc];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Base => "base",
            Self::A => "a",
            Self::Aw => "aw",
            Self::Ac => "ac",
            Self::Awc => "awc",
        }
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['+', ' ', '_'], "").as_str() {
            "base" => Ok(Self::Base),
            "a" => Ok(Self::A),
            "aw" => Ok(Self::Aw),
            "ac" => Ok(Self::Ac),
            "awc" => Ok(Self::Awc),
            _ => Err(format!("unknown model {s:?} (expected base, a, aw, ac or awc)")),
        }
    }
}

pub const DEFAULT_RIDGE: f64 = 1.0;

impl DesignSpec {
    pub fn intercept_only() -> Self {
        Self {
            include_activity: false,
            include_activity_squared: false,
            include_worker: false,
            include_crop: false,
            include_question: false,
            include_day: false,
            ridge_lambda_worker: DEFAULT_RIDGE,
            ridge_lambda_crop: DEFAULT_RIDGE,
            class_balanced: false,
        }
    }

    /// Ladder models all control for question and day.
    pub fn variant(v: ModelVariant) -> Self {
        let activity = v != ModelVariant::Base;
        Self {
            include_activity: activity,
            include_activity_squared: activity,
            include_worker: matches!(v, ModelVariant::Aw | ModelVariant::Awc),
            include_crop: matches!(v, ModelVariant::Ac | ModelVariant::Awc),
            include_question: true,
            include_day: true,
            ..Self::intercept_only()
        }
    }

    /// The online predictor: worker, crop and question only, class-balanced.
    pub fn pruning() -> Self {
        Self {
            include_worker: true,
            include_crop: true,
            include_question: true,
            class_balanced: true,
            ..Self::intercept_only()
        }
    }

    pub fn needs_activity(&self) -> bool {
        self.include_activity || self.include_activity_squared
    }
}

/// Column ordering: intercept, t, t², question, day, worker, crop. The crop
/// block comes last because each row touches at most one crop column, which
/// the solver exploits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub t: Option<usize>,
    pub t2: Option<usize>,
    pub question: (usize, usize),
    pub day: (usize, usize),
    pub worker: (usize, usize),
    pub crop: (usize, usize),
}

impl Layout {
    pub fn n_columns(&self) -> usize {
        self.crop.0 + self.crop.1
    }

    /// Columns other than the crop block.
    pub fn n_dense(&self) -> usize {
        self.crop.0
    }
}

/// Non-reference levels of each categorical block, in column order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DesignLevels {
    pub question: Vec<String>,
    pub day: Vec<String>,
    pub worker: Vec<String>,
    pub crop: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignRow<S> {
    /// Continuous activity in hours (0 when activity is excluded).
    pub t: S,
    pub question: Option<u32>,
    pub day: Option<u32>,
    pub worker: Option<u32>,
    pub crop: Option<u32>,
    pub label: bool,
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDesign<S> {
    pub spec: DesignSpec,
    pub levels: DesignLevels,
    pub rows: Vec<DesignRow<S>>,
}

impl<S: Scalar> LabeledDesign<S> {
    pub fn layout(&self) -> Layout {
        let mut next = 1;
        let mut take = |on: bool| {
            if on {
                next += 1;
                Some(next - 1)
            } else {
                None
            }
        };
        let t = take(self.spec.include_activity);
        let t2 = take(self.spec.include_activity_squared);
        let mut block = |len: usize| {
            let b = (next, len);
            next += len;
            b
        };
        let question = block(self.levels.question.len());
        let day = block(self.levels.day.len());
        let worker = block(self.levels.worker.len());
        let crop = block(self.levels.crop.len());
        Layout { t, t2, question, day, worker, crop }
    }

    pub fn n_columns(&self) -> usize {
        self.layout().n_columns()
    }

    pub fn positives(&self) -> usize {
        self.rows.iter().filter(|r| r.label).count()
    }
}

/// First-seen level registry; the first level may be dropped as reference.
struct LevelIndex<'a> {
    drop_first: bool,
    first: Option<&'a str>,
    map: HashMap<&'a str, u32>,
    names: Vec<String>,
}

impl<'a> LevelIndex<'a> {
    fn new(drop_first: bool) -> Self {
        Self { drop_first, first: None, map: HashMap::new(), names: Vec::new() }
    }

    fn index(&mut self, name: &'a str) -> Option<u32> {
        if self.first.is_none() {
            self.first = Some(name);
        }
        if self.drop_first && self.first == Some(name) {
            return None;
        }
        if let Some(&i) = self.map.get(name) {
            return Some(i);
        }
        let i = self.names.len() as u32;
        self.map.insert(name, i);
        self.names.push(name.to_string());
        Some(i)
    }
}

/// One design row per record, labelled by its minority flag.
pub fn build_design<S: Scalar>(
    records: &[RepeatRecord],
    flags: &[bool],
    sessions: Option<&[ActivitySession]>,
    spec: &DesignSpec,
) -> Result<LabeledDesign<S>> {
    if flags.len() != records.len() {
        return Err(Error::InvalidArgument(format!("{} flags for {} records", flags.len(), records.len())));
    }
    let hours = match (spec.needs_activity(), sessions) {
        (true, None) => {
            return Err(Error::InvalidArgument("design includes activity but no sessions were supplied".into()))
        }
        (true, Some(s)) => Some(activity_hours(records.len(), s)),
        (false, _) => None,
    };
    let mut question = LevelIndex::new(true);
    let mut day = LevelIndex::new(true);
    let mut worker = LevelIndex::new(spec.ridge_lambda_worker <= 0.0);
    let mut crop = LevelIndex::new(spec.ridge_lambda_crop <= 0.0);

    let mut rows = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        rows.push(DesignRow {
            t: hours.as_ref().map_or(S::zero(), |h| S::of(h[i])),
            question: if spec.include_question { question.index(&r.task.question_id) } else { None },
            day: if spec.include_day { day.index(&r.day) } else { None },
            worker: if spec.include_worker { worker.index(&r.worker_id) } else { None },
            crop: if spec.include_crop { crop.index(&r.task.crop_id) } else { None },
            label: flags[i],
            weight: S::one(),
        });
    }
    if spec.class_balanced && !rows.is_empty() {
        let n = rows.len();
        let pos = flags.iter().filter(|&&f| f).count();
        let neg = n - pos;
        let w = |count: usize| if count == 0 { S::one() } else { S::of_usize(n) / (S::of(2.0) * S::of_usize(count)) };
        let (wp, wn) = (w(pos), w(neg));
        for row in &mut rows {
            row.weight = if row.label { wp } else { wn };
        }
    }
    Ok(LabeledDesign {
        spec: *spec,
        levels: DesignLevels { question: question.names, day: day.names, worker: worker.names, crop: crop.names },
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetadata<S> {
    /// Unweighted log-likelihood at the fitted coefficients.
    pub log_likelihood: S,
    /// Unweighted log-likelihood of the intercept-only fit on the same rows.
    pub null_log_likelihood: S,
    pub converged: bool,
    pub iterations: usize,
    pub n_rows: usize,
    pub n_positive: usize,
    pub n_parameters: usize,
}

/// Fitted coefficients keyed by identifier. Identifiers absent from a map
/// (unseen or reference levels) contribute zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel<S> {
    pub intercept: S,
    pub beta_t1: S,
    pub beta_t2: S,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub worker_effects: BTreeMap<String, S>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub crop_effects: BTreeMap<String, S>,
    pub question_effects: BTreeMap<String, S>,
    pub day_effects: BTreeMap<String, S>,
    pub spec: DesignSpec,
    #[serde(rename = "metadata")]
    pub meta: FitMetadata<S>,
}

/// What is known about an assignment at prediction time.
#[derive(Debug, Clone, Copy)]
pub struct PredictContext<'a, S> {
    pub task: &'a TaskKey,
    pub worker_id: &'a str,
    /// Hours of continuous activity.
    pub t: S,
    pub day: &'a str,
}

impl<S: Scalar> FittedModel<S> {
    pub fn linear_predictor(&self, ctx: &PredictContext<'_, S>) -> S {
        let look = |m: &BTreeMap<String, S>, k: &str| m.get(k).copied().unwrap_or_else(S::zero);
        self.intercept
            + self.beta_t1 * ctx.t
            + self.beta_t2 * ctx.t * ctx.t
            + look(&self.question_effects, &ctx.task.question_id)
            + look(&self.day_effects, ctx.day)
            + look(&self.worker_effects, ctx.worker_id)
            + look(&self.crop_effects, &ctx.task.crop_id)
    }

    /// Probability of a minority report.
    pub fn predict(&self, ctx: &PredictContext<'_, S>) -> S {
        inv_logit(self.linear_predictor(ctx))
    }

    /// Fitted probability of every row of a design built with the same spec.
    pub fn predict_design(&self, design: &LabeledDesign<S>) -> Vec<S> {
        let look = |m: &BTreeMap<String, S>, names: &[String], i: Option<u32>| {
            i.and_then(|i| m.get(&names[i as usize]).copied()).unwrap_or_else(S::zero)
        };
        let lv = &design.levels;
        design
            .rows
            .iter()
            .map(|r| {
                inv_logit(
                    self.intercept
                        + self.beta_t1 * r.t
                        + self.beta_t2 * r.t * r.t
                        + look(&self.question_effects, &lv.question, r.question)
                        + look(&self.day_effects, &lv.day, r.day)
                        + look(&self.worker_effects, &lv.worker, r.worker)
                        + look(&self.crop_effects, &lv.crop, r.crop),
                )
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String>
    where
        S: Serialize,
    {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        S: for<'de> Deserialize<'de>,
    {
        Ok(serde_json::from_str(text)?)
    }
}
