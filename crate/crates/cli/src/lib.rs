//! Configuration and orchestration for the cnls-kam command line tool.

pub mod commands;
pub mod config;

pub use commands::{cmd_build, cmd_dump, cmd_iterate, cmd_load, cmd_measure, cmd_validate, Outputs, ValidateSource};
pub use config::RunConfig;

use cnls_kam::KamError;

/// Process exit status for an error: 2 configuration, 3 refused precondition or small
/// divisor, 4 numerical failure, 1 anything else.
pub fn exit_code(e: &KamError) -> i32 {
    match e.root() {
        KamError::Config(_) | KamError::Parse { .. } => 2,
        KamError::Precondition(_) | KamError::DivisorRefusal { .. } => 3,
        KamError::Numerical(_) | KamError::NonConvergence { .. } | KamError::NonRealIncrement { .. } => 4,
        _ => 1,
    }
}
