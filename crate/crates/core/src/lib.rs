//! Measuring how well explanation-faithfulness metrics tell faithful
//! explanations from unfaithful ones.
//!
//! The crate builds task instances whose two explanations are faithful to
//! two differently edited models, scores both explanations with each
//! faithfulness metric against the model edited one way, and reports how
//! often the faithful explanation wins.

pub mod bundled;
pub mod corruption;
pub mod datagen;
pub mod diagnosticity;
pub mod domain;
pub mod editing;
pub mod metrics;
pub mod error;
pub mod model;
pub mod prompts;
pub mod reliability;
pub mod runner;
pub mod text;

pub use domain::{
    validate_instance, EditStatement, ExplanationPair, KnowledgeTriplet, MetricKind, MetricResult,
    Scoring, Target, TaskInstance, TaskKind, ValidationReport, Violation, ViolationCode,
};
pub use error::{Error, ErrorCode, Result};
pub use model::{IceContext, LabelDistribution, MockConfig, MockModel, ModelEndpoint, Prediction};
