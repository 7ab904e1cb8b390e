//! Experiment protocols, dataset ingestion and report emission for the `pim-uq` tool.

pub mod config;
pub mod data;
pub mod error;
pub mod protocols;
pub mod report;
pub mod synthetic;

pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
pub use report::{ExperimentReport, Format};
