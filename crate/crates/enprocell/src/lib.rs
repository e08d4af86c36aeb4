//! File formats, evaluation protocols and the `enprocell` command-line tool
//! built on [`enprocell_core`].
//!
//! - [`io`]: dense CSV/TSV and MatrixMarket matrices, label tables.
//! - [`format`]: the versioned, checksummed pipeline file.
//! - [`evaluation`]: intra- and inter-dataset protocols, component sweeps,
//!   prediction timing.
//! - [`config`]: the flat `key=value` run configuration.
//! - [`report`]: CSV, text and JSON-lines outputs.

pub mod config;
pub mod error;
pub mod evaluation;
pub mod format;
pub mod io;
pub mod report;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use evaluation::{run_inter, run_intra, stack_references, sweep_components, time_predict, Protocol, SweepResult, Timing};
pub use format::{load_pipeline, save_pipeline};
