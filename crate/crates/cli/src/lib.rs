//! File formats, workflows and evaluation behind the `ehgm` command.

pub mod error;
pub mod eval;
pub mod io;
pub mod run;
pub mod synth;
pub mod verify;

pub use error::{exit, CliError, Result};
