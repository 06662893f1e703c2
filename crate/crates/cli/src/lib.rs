//! Command-line front end: manifests, subcommands and report files.

pub mod commands;
pub mod manifest;
pub mod report;

use flipscan_core::{Error, ErrorClass};

/// Process exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}
