//! Command-line front end for the cone-constrained singular value solvers.

pub mod app;
pub mod bench;
pub mod error;
pub mod gen;
pub mod matfile;
pub mod pipeline;
pub mod report;

pub use error::{CliError, CliResult};
