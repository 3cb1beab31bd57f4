use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inclusive range of repeats per task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepeatRange {
    pub min: usize,
    pub max: usize,
}

impl RepeatRange {
    pub fn fixed(n: usize) -> Self {
        Self { min: n, max: n }
    }

    pub fn mean(&self) -> f64 {
        (self.min + self.max) as f64 / 2.0
    }

    pub fn contains_even(&self) -> bool {
        (self.min..=self.max).any(|n| n % 2 == 0)
    }
}

impl FromStr for RepeatRange {
    type Err = String;

    /// `"11"`, `"5-12"` or `"5..12"` (both inclusive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
        if let Some((a, b)) = s.split_once("..").or_else(|| s.split_once('-')) {
            Ok(Self { min: parse(a)?, max: parse(b.trim_start_matches('='))? })
        } else {
            parse(s).map(Self::fixed)
        }
    }
}

impl std::fmt::Display for RepeatRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.min == self.max {
            write!(f, "{}", self.min)
        } else {
            write!(f, "{}-{}", self.min, self.max)
        }
    }
}

/// Parameters of the synthetic annotation process. Effects are on the
/// log-odds scale of a vote being wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub crops: usize,
    pub workers: usize,
    pub questions: usize,
    pub repeats: RepeatRange,
    pub sigma_u: f64,
    pub sigma_v: f64,
    pub intercept: f64,
    /// Per hour of continuous activity.
    pub beta_t1: f64,
    /// Per squared hour.
    pub beta_t2: f64,
    /// One entry per question, or empty for all zeros.
    pub question_effects: Vec<f64>,
    /// One entry per simulated day, or empty for all zeros.
    pub day_effects: Vec<f64>,
    pub cant_solve_prob: f64,
    pub base_yes_rate: f64,
    pub seed: u64,
    pub days: usize,
    pub shift_hours: f64,
    /// Earliest shift start, hours after midnight.
    pub shift_start_hour: f64,
    /// Per-worker shift starts are staggered uniformly over this many hours.
    pub shift_stagger_hours: f64,
    /// Probability a joined worker shows up on a given day.
    pub attendance: f64,
    /// Fraction of workers who join after the first day.
    pub late_join_fraction: f64,
    /// Mean response time in seconds; also the tightest pacing allowed.
    pub mean_duration_s: f64,
    pub start_epoch: i64,
    pub tz_offset_s: i64,
    /// Warn when the repeat range admits even counts.
    pub theory_check: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            crops: 1000,
            workers: 40,
            questions: 1,
            repeats: RepeatRange { min: 5, max: 12 },
            sigma_u: 1.26,
            sigma_v: 1.20,
            intercept: -3.135,
            beta_t1: 0.399f64.ln(),
            beta_t2: 1.428f64.ln(),
            question_effects: Vec::new(),
            day_effects: Vec::new(),
            cant_solve_prob: 0.0,
            base_yes_rate: 0.185,
            seed: 7,
            days: 5,
            shift_hours: 8.0,
            shift_start_hour: 8.0,
            shift_stagger_hours: 4.0,
            attendance: 0.8,
            late_join_fraction: 0.25,
            mean_duration_s: 0.91,
            // 2023-01-18T00:00:00Z
            start_epoch: 1_674_000_000,
            tz_offset_s: 0,
            theory_check: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in
            [("crops", self.crops), ("workers", self.workers), ("questions", self.questions), ("days", self.days)]
        {
            if v < 1 {
                bad.push(format!("{name} must be at least 1"));
            }
        }
        if self.repeats.min < 1 || self.repeats.max > 25 || self.repeats.min > self.repeats.max {
            bad.push(format!("repeats {} must be a non-empty range within [1, 25]", self.repeats));
        }
        for (name, v) in [("sigma_u", self.sigma_u), ("sigma_v", self.sigma_v)] {
            if !(v >= 0.0 && v.is_finite()) {
                bad.push(format!("{name} must be finite and non-negative"));
            }
        }
        for (name, v) in [("intercept", self.intercept), ("beta_t1", self.beta_t1), ("beta_t2", self.beta_t2)] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite"));
            }
        }
        if !self.question_effects.is_empty() && self.question_effects.len() != self.questions {
            bad.push(format!(
                "question_effects has {} entries for {} questions",
                self.question_effects.len(),
                self.questions
            ));
        }
        if !self.day_effects.is_empty() && self.day_effects.len() != self.days {
            bad.push(format!("day_effects has {} entries for {} days", self.day_effects.len(), self.days));
        }
        if self.question_effects.iter().chain(&self.day_effects).any(|v| !v.is_finite()) {
            bad.push("question_effects and day_effects must be finite".into());
        }
        if !(0.0..1.0).contains(&self.cant_solve_prob) {
            bad.push("cant_solve_prob must lie in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.base_yes_rate) {
            bad.push("base_yes_rate must lie in [0, 1]".into());
        }
        if !(self.shift_hours > 0.0 && self.shift_hours <= 24.0) {
            bad.push("shift_hours must lie in (0, 24]".into());
        }
        if !(self.shift_start_hour >= 0.0 && self.shift_stagger_hours >= 0.0)
            || self.shift_start_hour + self.shift_stagger_hours + self.shift_hours > 24.0
        {
            bad.push("shift_start_hour + shift_stagger_hours + shift_hours must fit in one day".into());
        }
        if !(self.attendance > 0.0 && self.attendance <= 1.0) {
            bad.push("attendance must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.late_join_fraction) {
            bad.push("late_join_fraction must lie in [0, 1]".into());
        }
        if !(self.mean_duration_s > 0.0 && self.mean_duration_s.is_finite()) {
            bad.push("mean_duration_s must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    pub fn question_effect(&self, q: usize) -> f64 {
        self.question_effects.get(q).copied().unwrap_or(0.0)
    }

    pub fn day_effect(&self, d: usize) -> f64 {
        self.day_effects.get(d).copied().unwrap_or(0.0)
    }

    /// Log-odds that a vote is wrong.
    pub fn error_log_odds(&self, u: f64, v: f64, t_hours: f64, question: usize, day: usize) -> f64 {
        self.intercept
            + u
            + v
            + self.beta_t1 * t_hours
            + self.beta_t2 * t_hours * t_hours
            + self.question_effect(question)
            + self.day_effect(day)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults. All problems are reported together.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = GenConfig::default();
        let mut bad = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bad.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            if let Err(e) = cfg.set(key.trim(), value.trim()) {
                bad.push(format!("line {}: {e}", i + 1));
            }
        }
        if let Err(Error::InvalidConfig(more)) = cfg.validate() {
            bad.extend(more);
        }
        if bad.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.parse::<T>().map_err(|e| format!("{key}: cannot parse {v:?}: {e}"))
        }
        fn list(key: &str, v: &str) -> std::result::Result<Vec<f64>, String> {
            if v.is_empty() {
                return Ok(Vec::new());
            }
            v.split(',').map(|x| num::<f64>(key, x.trim())).collect()
        }
        match key {
            "crops" | "I" => self.crops = num(key, value)?,
            "workers" | "J" => self.workers = num(key, value)?,
            "questions" | "K" => self.questions = num(key, value)?,
            "repeats" | "repeats_per_task" => self.repeats = value.parse().map_err(|e| format!("{key}: {e}"))?,
            "sigma_u" => self.sigma_u = num(key, value)?,
            "sigma_v" => self.sigma_v = num(key, value)?,
            "intercept" => self.intercept = num(key, value)?,
            "beta_t1" => self.beta_t1 = num(key, value)?,
            "beta_t2" => self.beta_t2 = num(key, value)?,
            "question_effects" => self.question_effects = list(key, value)?,
            "day_effects" => self.day_effects = list(key, value)?,
            "cant_solve_prob" => self.cant_solve_prob = num(key, value)?,
            "base_yes_rate" => self.base_yes_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "days" => self.days = num(key, value)?,
            "shift_hours" => self.shift_hours = num(key, value)?,
            "shift_start_hour" => self.shift_start_hour = num(key, value)?,
            "shift_stagger_hours" => self.shift_stagger_hours = num(key, value)?,
            "attendance" => self.attendance = num(key, value)?,
            "late_join_fraction" => self.late_join_fraction = num(key, value)?,
            "mean_duration_s" => self.mean_duration_s = num(key, value)?,
            "start_epoch" => self.start_epoch = num(key, value)?,
            "tz_offset_s" => self.tz_offset_s = num(key, value)?,
            "theory_check" => self.theory_check = num(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Inverse of [`GenConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "crops = {}", self.crops);
        let _ = writeln!(s, "workers = {}", self.workers);
        let _ = writeln!(s, "questions = {}", self.questions);
        let _ = writeln!(s, "repeats = {}", self.repeats);
        let _ = writeln!(s, "sigma_u = {}", self.sigma_u);
        let _ = writeln!(s, "sigma_v = {}", self.sigma_v);
        let _ = writeln!(s, "intercept = {}", self.intercept);
        let _ = writeln!(s, "beta_t1 = {}", self.beta_t1);
        let _ = writeln!(s, "beta_t2 = {}", self.beta_t2);
        let _ = writeln!(s, "question_effects = {}", join(&self.question_effects));
        let _ = writeln!(s, "day_effects = {}", join(&self.day_effects));
        let _ = writeln!(s, "cant_solve_prob = {}", self.cant_solve_prob);
        let _ = writeln!(s, "base_yes_rate = {}", self.base_yes_rate);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "days = {}", self.days);
        let _ = writeln!(s, "shift_hours = {}", self.shift_hours);
        let _ = writeln!(s, "shift_start_hour = {}", self.shift_start_hour);
        let _ = writeln!(s, "shift_stagger_hours = {}", self.shift_stagger_hours);
        let _ = writeln!(s, "attendance = {}", self.attendance);
        let _ = writeln!(s, "late_join_fraction = {}", self.late_join_fraction);
        let _ = writeln!(s, "mean_duration_s = {}", self.mean_duration_s);
        let _ = writeln!(s, "start_epoch = {}", self.start_epoch);
        let _ = writeln!(s, "tz_offset_s = {}", self.tz_offset_s);
        let _ = writeln!(s, "theory_check = {}", self.theory_check);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_file() {
        let cfg = GenConfig::parse("# tiny\nI = 2\nJ = 3\nK = 1\nrepeats = 3  # fixed\nseed = 7\n").unwrap();
        assert_eq!((cfg.crops, cfg.workers, cfg.questions), (2, 3, 1));
        assert_eq!(cfg.repeats, RepeatRange::fixed(3));
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.sigma_u, 1.26);
    }

    #[test]
    fn defaults_match_calibration() {
        let d = GenConfig::default();
        assert!((d.beta_t1 + 0.919).abs() < 1e-3);
        assert!((d.beta_t2 - 0.356).abs() < 1e-3);
        assert_eq!(d.repeats, RepeatRange { min: 5, max: 12 });
        d.validate().unwrap();
    }

    #[test]
    fn reports_every_bad_field() {
        let err = GenConfig::parse("crops = 0\nrepeats = 3-30\nbogus = 1\nsigma_v = x\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("sigma_v"), "{msg}");
        let err = GenConfig::parse("crops = 0\nrepeats = 3-30\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("crops") && msg.contains("repeats"), "{msg}");
        assert!(GenConfig::parse("no equals sign").is_err());
        assert!(GenConfig::parse("questions = 2\nquestion_effects = 0.1\n").is_err());
    }

    #[test]
    fn range_syntax() {
        assert_eq!("5-12".parse::<RepeatRange>().unwrap(), RepeatRange { min: 5, max: 12 });
        assert_eq!("5..12".parse::<RepeatRange>().unwrap(), RepeatRange { min: 5, max: 12 });
        assert!(RepeatRange::fixed(4).contains_even());
        assert!(!RepeatRange::fixed(5).contains_even());
    }

    #[test]
    fn config_string_roundtrip() {
        let mut cfg = GenConfig { question_effects: vec![0.1, -0.25], questions: 2, ..GenConfig::default() };
        cfg.day_effects = vec![0.0; 5];
        assert_eq!(GenConfig::parse(&cfg.to_config_string()).unwrap(), cfg);
    }
}
