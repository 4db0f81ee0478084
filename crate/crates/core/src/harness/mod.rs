//! Experiment harness behind the `stcon` binary: configuration, single runs,
//! the stepsize comparison grid, verification campaigns and spectra tables.

pub mod cli;
pub mod config;
pub mod fig1;
pub mod run;
pub mod spectra;
pub mod verify;

use std::path::{Path, PathBuf};

use crate::consensus::TerminalStatus;
use crate::error::Error;

pub use cli::{main_with, Cli};
pub use config::{parse_key_values, GraphArgs, RunArgs};
pub use fig1::{cmd_fig1, run_experiment, ExperimentSpec, FigureBundle};
pub use run::{cmd_run, execute_run, RunOutcome, SUMMARY_HEADER};
pub use spectra::{cmd_spectra, SpectraReport};
pub use verify::{run_verify, Suite, VerifyOptions, VerifyReport};

/// Environment variable naming the output directory when `--out` is absent.
pub const OUT_ENV: &str = "STCON_OUT";
pub const DEFAULT_OUT_DIR: &str = "stcon-out";

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const STAGNATED: i32 = 2;
    pub const MAX_ITERS: i32 = 3;
    pub const DEGENERATE: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const VERIFY_FAILED: i32 = 6;
}

pub fn status_exit_code(status: TerminalStatus) -> i32 {
    match status {
        TerminalStatus::Converged => exit::OK,
        TerminalStatus::Stagnated => exit::STAGNATED,
        TerminalStatus::MaxIters => exit::MAX_ITERS,
        TerminalStatus::DegenerateMean => exit::DEGENERATE,
    }
}

pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::EdgeList { .. }
        | Error::InvalidMixingMatrix(_)
        | Error::NotConnected { .. }
        | Error::InvalidDimensions(_) => exit::CONFIG,
        Error::DegenerateMean { .. } => exit::DEGENERATE,
        _ => exit::OTHER,
    }
}

/// `--out` if given, else `$STCON_OUT`, else [`DEFAULT_OUT_DIR`].
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT_DIR),
    }
}
