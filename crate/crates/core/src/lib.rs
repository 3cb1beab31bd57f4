//! Prediction and pruning of minority reports in repeated crowd annotation.
//!
//! * [`annotation`]: logs, majority votes, minority flags, activity sessions.
//! * [`synthgen`]: synthetic annotation logs with worker, crop and fatigue effects.
//! * [`glm`]: class-balanced ridge logistic regression predicting minority reports.
//! * [`pruner`]: interval replay that prunes assignments predicted to disagree.
//! * [`theory`]: exact error probability of pruning a fixed number of votes.
//!
//! Numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision used by the command-line tool.

// `!(x > 0.0)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod diagnostics;
pub mod error;
pub mod glm;
pub mod numfmt;
pub mod pruner;
pub mod scalar;
pub mod synthgen;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ClassifierRates = theory::ClassifierRates<f64>;
pub type ClassifierRatesF32 = theory::ClassifierRates<f32>;
pub type TheoryConfig = theory::TheoryConfig<f64>;
pub type TheoryConfigF32 = theory::TheoryConfig<f32>;
pub type GaussianScoreModel = theory::GaussianScoreModel<f64>;
pub type GaussianScoreModelF32 = theory::GaussianScoreModel<f32>;
pub type CurveRow = theory::CurveRow<f64>;
pub type FittedModel = glm::FittedModel<f64>;
pub type LabeledDesign = glm::LabeledDesign<f64>;
