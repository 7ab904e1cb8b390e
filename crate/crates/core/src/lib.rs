pub mod classification;
pub mod conformal;
pub mod error;
pub mod metrics;
pub mod neuron;
pub mod nn;
pub mod order_stats;
pub mod stats;

pub use error::{Error, Result};
