//! Front end for the `osm` binary: instance files, commands and exit codes.
//!
//! Exit codes: 0 success, 1 other failure, 2 unreadable or invalid input,
//! 3 invalid transform, 4 size guard exceeded, 10 profitable misreport found
//! by `audit`.

pub mod commands;
pub mod error;
pub mod format;

pub use commands::{run, Cli, Output};
pub use error::{CliError, CliResult};
