//! Command-line surface and Monte-Carlo experiment drivers for mopup-core:
//! text formats for sample sets, seeded study runners with CSV output, and
//! the `mopup` binary's subcommand implementations.

pub mod experiment;
pub mod io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Core(#[from] mopup_core::Error),
}

impl CliError {
    /// 2 = config/argument error, 3 = parse or file error, 4 = numerical
    /// failure in a decomposition kernel.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(mopup_core::Error::Argument(_)) => 2,
            CliError::Parse { .. } | CliError::Io(_) => 3,
            CliError::Core(mopup_core::Error::Numerical(_)) => 4,
        }
    }
}
