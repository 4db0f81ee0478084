//! Command-line interface of `stcon`.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;

use super::config::{GraphArgs, RunArgs};
use super::run::SUMMARY_HEADER;
use super::verify::{run_verify, Suite, VerifyOptions};
use super::{cmd_fig1, cmd_run, cmd_spectra, error_exit_code, exit, output_dir};

#[derive(Parser, Debug)]
#[command(
    name = "stcon",
    version,
    about = "Distributed consensus on the Stiefel manifold"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one configuration and write its trace
    Run(RunArgs),
    /// Run the stepsize comparison grid on ring(30) and its lazy variant
    Fig1(Fig1Args),
    /// Run verification campaigns and print one line per check
    Verify(VerifyArgs),
    /// Print spectral constants and the stepsize menu
    Spectra(SpectraArgs),
}

#[derive(Args, Debug)]
pub struct Fig1Args {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Comma-separated suites: manifold, network, consensus, rsi, rates, all or none
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Samples per campaign
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    pub t: u32,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                exit::CONFIG
            } else {
                exit::OK
            };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            error_exit_code(&e)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Run(args) => {
            let outcome = cmd_run(&args)?;
            writeln!(stdout, "{SUMMARY_HEADER}")?;
            writeln!(stdout, "{}", outcome.summary_row())?;
            Ok(outcome.exit_code())
        }
        Command::Fig1(args) => {
            let out = output_dir(args.out.as_deref());
            let bundle = cmd_fig1(args.seed, &out)?;
            writeln!(stdout, "{SUMMARY_HEADER}")?;
            for r in &bundle.runs {
                writeln!(stdout, "{}", r.summary_row())?;
            }
            writeln!(stdout, "# summary: {}", bundle.summary_path.display())?;
            writeln!(stdout, "# plot: {}", bundle.plot_path.display())?;
            Ok(exit::OK)
        }
        Command::Verify(args) => {
            let mut opts =
                VerifyOptions::new(Suite::parse_list(&args.suite)?, args.seed, args.samples);
            if let Some(t) = args.threads {
                opts.threads = t.max(1);
            }
            let report = run_verify(&opts)?;
            write!(stdout, "{report}")?;
            Ok(report.exit_code())
        }
        Command::Spectra(args) => {
            let report = cmd_spectra(&args.graph.to_spec()?, args.t)?;
            write!(stdout, "{report}")?;
            Ok(exit::OK)
        }
    }
}
