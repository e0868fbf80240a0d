//! `convpca` command-line tool and read-only HTTP service.
//!
//! Batch work (rasterizing graphs, training, encoding, fitting PCA, sweeps,
//! statistics) runs as subcommands; `serve` exposes a trained CAE + PCA pair
//! to the latent-space explorer.

pub mod cli;
pub mod commands;
pub mod server;
pub mod workspace;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;

pub use cli::Cli;
pub use workspace::WorkspaceManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Core(#[from] convpca_core::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Input(String),

    #[error("workspace {path}: {message}")]
    Workspace { path: PathBuf, message: String },

    #[error("server: {0}")]
    Server(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => EXIT_USAGE,
            _ => EXIT_FAILURE,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
