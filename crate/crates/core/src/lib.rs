//! Detect erroneous numeric responses in regression datasets with any
//! regression model.
//!
//! The crate computes per-row veracity scores from out-of-sample
//! predictions, rescaled by epistemic and aleatoric uncertainty estimates,
//! and builds two detectors on top of them: an iterative filter that picks
//! how much data to drop by whole-dataset out-of-sample R², and split
//! conformal p-values with Benjamini–Hochberg selection. A simulation
//! harness reproduces the synthetic benchmark studies.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod conformal;
pub mod data;
pub mod error;
pub mod filter;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod scores;
pub mod seed;
pub mod simbench;
pub mod uncertainty;

pub use data::{inject_corruption, load_csv, split, CorruptionSpec, Dataset, SplitSpec};
pub use error::{Error, Result};
pub use models::{Regressor, RegressorSpec};
pub use scores::{ScoreMethod, ScoreVector};
pub use uncertainty::UncertaintyEstimates;
