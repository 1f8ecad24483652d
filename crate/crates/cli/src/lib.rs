//! Front end for `daim-core`: simulation, decomposition, Monte Carlo
//! experiment sweeps and concentration checks, each driven by a JSON config.

pub mod concentration;
pub mod decompose;
mod error;
pub mod experiment;
pub mod io;
pub mod simulate;

pub use error::{CliError, CliResult};
