//! File formats, configuration and the experiment command line for
//! dynamic model predictive shielding. The algorithms live in `dmps-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod csvio;
mod error;
pub mod experiment;
pub mod manifest;

pub use error::{exit, DmpsError, DmpsResult};
