//! Experiment configuration, presets and the sweep pipeline behind the
//! `hyperspin` binary.

use std::path::PathBuf;

pub mod config;
pub mod pipeline;
pub mod presets;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("solver failure at {context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: hyperspin::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver { .. } => 3,
            Self::Io { .. } => 1,
        }
    }
}
