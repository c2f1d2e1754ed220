//! Configuration, file formats and run orchestration for the `helmddm`
//! command-line tool.

pub mod config;
pub mod dump;
pub mod render;
pub mod run;

use helmddm::HelmError;

/// Process exit status for an error.
pub fn exit_code(e: &HelmError) -> i32 {
    match e {
        HelmError::Config(_) => 2,
        HelmError::Io(_) => 4,
        _ => 1,
    }
}

pub const EXIT_NOT_CONVERGED: i32 = 3;
