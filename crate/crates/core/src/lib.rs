//! Conformal prediction for binary classifiers, together with the metrics
//! needed to judge what its prediction regions are actually worth.
//!
//! The crate covers three predictors:
//!
//! * inductive / Mondrian conformal prediction over a calibration set
//!   ([`icp`]),
//! * full transductive conformal prediction in the on-line protocol
//!   ([`online`]),
//! * the nonconformity measures that feed both ([`nonconformity`]).
//!
//! Every binary region is one of `{positive}`, `{negative}`, both or empty.
//! The [`eval`] module reports validity and efficiency side by side with the
//! region decomposition, both-as-correct / both-as-wrong accuracy, classical
//! confusion-matrix rates and the quality of singleton predictions.
//!
//! Scores are *conformity* scores throughout: higher means more typical of
//! the hypothesized class.

pub mod cli;
pub mod domain;
mod error;
pub mod eval;
pub mod icp;
pub mod io;
pub mod nonconformity;
pub mod online;
pub mod pipeline;
pub mod report;
pub mod synth;

pub use domain::{
    region_contains, Dataset, FeatureVector, Label, PredictionRegion, Sample, ScoreKind,
    ScorePair, SignificanceLevel,
};
pub use error::{Error, Result};
