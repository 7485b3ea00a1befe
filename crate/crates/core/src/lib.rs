//! Outcome classification of process traces.
//!
//! The crate covers the whole path from a raw event log to explained
//! classifiers:
//!
//! 1. [`eventlog`]: parse CSV/XES logs into traces, label them with a
//!    [`eventlog::LabelRule`] and compute per-class duplicate statistics.
//! 2. [`leakage`]: find activities that trivially reveal the label and strip them.
//! 3. [`splitting`]: split unique traces 70/30 per class, keeping duplicates in train only.
//! 4. [`encoding`]: n-gram count vectors and fixed-length token sequences.
//! 5. [`linmodels`] and [`attnmodel`]: L1 logistic regression, CART trees and an
//!    attention-based sequence classifier, all trained from scratch.
//! 6. [`evaluation`]: AUROC and repeated stratified k-fold cross-validation.
//! 7. [`reporting`]: SVG charts and text tables for relevances, attention and results.
//!
//! [`pipeline`] wires the stages together from a single config document and
//! [`synth`] generates desk-scale logs with controllable duplicates and leaks.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indexed loops read closer to the math in the numeric kernels.
#![allow(clippy::needless_range_loop)]

pub mod attnmodel;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod eventlog;
pub mod leakage;
pub mod linmodels;
pub mod matrix;
pub mod pipeline;
pub mod relevance;
pub mod reporting;
pub mod seed;
pub mod splitting;
pub mod synth;

pub use error::{Error, Result};
pub use eventlog::{Label, LabeledLog, LabeledTrace, Trace};
