//! Single runs: execution, CSV trace and summary row.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::rate::DEFAULT_WINDOW_FRACTION;
use crate::analysis::{estimate_rate, RateEstimate, RateTargets, RegionParams};
use crate::consensus::{run_drcs, ConvergenceTrace, RunConfig};
use crate::error::Result;
use crate::network::SpectralProfile;

use super::config::RunArgs;

pub const SUMMARY_HEADER: &str =
    "name,graph,N,d,r,t,alpha_rule,alpha,retraction,mode,seed,init,status,\
iterations,final_consensus_sq,final_grad_norm_sq,rate,sigma2_pow_t,condition_rate,theorem_rate,csv";

/// `nu` used for the theorem target in summaries.
pub const SUMMARY_NU: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub name: String,
    pub config: RunConfig,
    pub alpha: f64,
    pub profile: SpectralProfile,
    pub trace: ConvergenceTrace,
    pub csv_path: PathBuf,
    /// How the initial state was chosen.
    pub init: String,
    /// Terminal-window estimate; `None` when the trace is too short.
    pub rate: Option<RateEstimate>,
}

impl RunOutcome {
    pub fn targets(&self) -> RateTargets {
        RateTargets::new(
            &self.profile,
            self.alpha,
            SUMMARY_NU,
            self.config.r,
            &RegionParams::maximal(self.config.graph.n, self.config.r),
        )
    }

    pub fn exit_code(&self) -> i32 {
        super::status_exit_code(self.trace.status())
    }

    pub fn summary_row(&self) -> String {
        let c = &self.config;
        let last = self.trace.last();
        let targets = self.targets();
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut row = String::new();
        write!(
            row,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.name,
            c.graph.label(),
            c.graph.n,
            c.d,
            c.r,
            c.t,
            c.alpha,
            self.alpha,
            c.retraction.name(),
            c.mode,
            c.seed,
            self.init,
            self.trace.status(),
            self.trace.iterations(),
            opt(last.map(|l| l.consensus_sq)),
            opt(last.map(|l| l.grad_norm_sq)),
            opt(self.rate.as_ref().map(|r| r.per_step_ratio)),
            targets.sigma2_pow_t,
            targets.condition_rate,
            opt(targets.theorem_rate),
            self.csv_path
                .file_name()
                .map(|f| f.to_string_lossy())
                .unwrap_or_default(),
        )
        .expect("writing to a String cannot fail");
        row
    }
}

/// Runs `config`, writes `<out_dir>/<name>.csv` and estimates the terminal rate.
pub fn execute_run(
    name: &str,
    config: &RunConfig,
    out_dir: &Path,
    init: &str,
) -> Result<RunOutcome> {
    let (_, profile, alpha) = config.resolve()?;
    let (trace, _) = run_drcs(config)?;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{name}.csv"));
    trace.save_csv(&csv_path)?;
    let mut outcome = RunOutcome {
        name: name.to_string(),
        config: config.clone(),
        alpha,
        profile,
        trace,
        csv_path,
        init: init.to_string(),
        rate: None,
    };
    outcome.rate = estimate_rate(
        &outcome.trace,
        DEFAULT_WINDOW_FRACTION,
        Some(outcome.targets()),
    )
    .ok();
    Ok(outcome)
}

/// Writes `header + rows` to `path`.
pub fn write_summary(path: &Path, rows: &[String]) -> Result<()> {
    let mut text = String::from(SUMMARY_HEADER);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// The `run` subcommand: one CSV trace plus `<name>.summary.csv`.
pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome> {
    let resolved = args.resolve()?;
    let init = format!("random:seed={}", resolved.config.seed);
    let outcome = execute_run(&resolved.name, &resolved.config, &resolved.out, &init)?;
    write_summary(
        &resolved.out.join(format!("{}.summary.csv", resolved.name)),
        &[outcome.summary_row()],
    )?;
    Ok(outcome)
}
