//! Core numerics of the EnProCell cell-type classifier.
//!
//! Expression data flows through four stages, each in its own module:
//!
//! - [`expression`]: the validated cells × genes matrix and its labeled form.
//! - [`preprocess`]: highly variable gene selection, library-size
//!   normalization, `log1p`, per-gene z-scoring.
//! - [`projection`]: PCA (high-variance directions) and multiple discriminant
//!   analysis (class-separating directions), concatenated into one ensemble
//!   basis that maps cells into a low-dimensional space.
//! - [`classifier`]: a ReLU feed-forward network with a softmax head trained
//!   with Adam on the projected cells, and the [`TrainedPipeline`] that
//!   bundles recipe, basis and network for prediction.
//!
//! [`metrics`] scores predictions and [`synth`] generates labeled synthetic
//! datasets with known geometry.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, protocols that
//! need a clock and the command-line tool live in the `enprocell` crate.

#![no_std]
#![cfg_attr(docsrs, feature(doc_cfg))]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifier;
mod error;
pub mod expression;
pub mod linalg;
pub mod metrics;
pub mod preprocess;
pub mod projection;
pub mod split;
pub mod synth;

pub use classifier::{
    ClassifierModel, NetworkConfig, PipelineConfig, Prediction, TrainedPipeline, TrainingMeta,
};
pub use error::{Error, Result};
pub use expression::{ExpressionMatrix, LabeledDataset};
pub use linalg::Matrix;
pub use metrics::EvalReport;
pub use preprocess::PreprocessRecipe;
pub use projection::{MdaBasis, PcaBasis, ProjectionBasis};
pub use synth::SynthSpec;
