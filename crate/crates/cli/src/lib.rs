//! Library behind the `acap` binary. Each subcommand is a function
//! returning an [`Output`] (text, JSON and exit code) so tests drive the
//! same code the binary runs.

pub mod bench;
pub mod demo;
pub mod diff;
pub mod explore;
pub mod hash;
pub mod serve;
pub mod validate;

mod output;

pub use output::{read_json, CliError, Output};
