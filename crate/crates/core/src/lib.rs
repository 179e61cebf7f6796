//! Two-stage group-sequential hypothesis testing of the incremental
//! ROC(t) value of a new biomarker over an established panel, with a
//! group-rotation specimen-allocation engine for biorepository studies.
//!
//! The library is organized around the pipeline:
//!
//! * [`scenario`] — synthetic case-control panels and CSV ingestion
//! * [`logistic`] — logistic working-model fits (full and restricted panels)
//! * [`roc`] — empirical ROC(t) at a fixed false-positive fraction
//! * [`variance`] — plug-in influence-function variance of the ROC difference
//! * [`boundary`] — symmetric two-stage alpha-spending boundaries
//! * [`seqtest`] — the two-stage decision rule
//! * [`rotation`] — group-rotation allocation and its operating characteristics
//! * [`harness`] — replicated experiments with deterministic parallel RNG

pub mod boundary;
pub mod config;
pub mod error;
pub mod harness;
pub mod kde;
pub mod logistic;
pub mod roc;
pub mod rotation;
pub mod scenario;
pub mod seqtest;
pub mod stats;
pub mod variance;

pub use error::{Error, Result};
