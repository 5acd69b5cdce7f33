//! File formats, synthetic datasets and the experiment runner for the Hopf
//! reservoir computer in `hopfrc-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod pgm;
pub mod pipeline;
pub mod report;
pub mod suites;
pub mod wav;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, Result};
pub use experiments::run;
pub use report::{report_emit, ExperimentReport};
