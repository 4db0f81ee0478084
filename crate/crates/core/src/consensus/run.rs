use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use crate::analysis::objective::phi_with_power;
use crate::analysis::regions::{RegionFlags, RegionParams};
use crate::error::{Error, Result};
use crate::manifold::{dist_inf, dist_sq, Retraction};
use crate::network::{GraphSpec, MixingMatrix, SpectralProfile};
use crate::state::NetworkState;

use super::gradient::{drcs_gradient, retract_along, GradientField};
use super::node_sim::NodeNetwork;

/// Stepsize rule, resolved against the `t`-step spectral constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaRule {
    OneOverL,
    TwoOverMuPlusL,
    TwoOverL,
    Unit,
    Custom(f64),
}

impl AlphaRule {
    pub fn resolve(self, profile: &SpectralProfile) -> f64 {
        match self {
            AlphaRule::OneOverL => 1.0 / profile.l_t,
            AlphaRule::TwoOverMuPlusL => 2.0 / (profile.mu_t + profile.l_t),
            AlphaRule::TwoOverL => 2.0 / profile.l_t,
            AlphaRule::Unit => 1.0,
            AlphaRule::Custom(a) => a,
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            AlphaRule::Custom(a) if !(a > 0.0 && a.is_finite()) => Err(Error::config(
                "alpha",
                format!("stepsize must be positive and finite, got {a}"),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaRule::OneOverL => f.write_str("one_over_L"),
            AlphaRule::TwoOverMuPlusL => f.write_str("two_over_mu_plus_L"),
            AlphaRule::TwoOverL => f.write_str("two_over_L"),
            AlphaRule::Unit => f.write_str("unit"),
            AlphaRule::Custom(a) => write!(f, "custom:{a}"),
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let rule = match s {
            "one_over_L" => AlphaRule::OneOverL,
            "two_over_mu_plus_L" => AlphaRule::TwoOverMuPlusL,
            "two_over_L" => AlphaRule::TwoOverL,
            "unit" => AlphaRule::Unit,
            other => match other.strip_prefix("custom:") {
                Some(v) => AlphaRule::Custom(
                    v.trim()
                        .parse()
                        .map_err(|_| Error::config("alpha", format!("`{v}` is not a number")))?,
                ),
                None => {
                    return Err(Error::config(
                        "alpha",
                        format!(
                            "unknown rule `{other}` (expected one_over_L, two_over_mu_plus_L, \
                             two_over_L, unit or custom:<value>)"
                        ),
                    ))
                }
            },
        };
        rule.validate()?;
        Ok(rule)
    }
}

/// Centralized matrix iteration or the per-agent message-passing simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Matrix,
    MessagePassing,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix" => Ok(Mode::Matrix),
            "message_passing" => Ok(Mode::MessagePassing),
            other => Err(Error::config(
                "mode",
                format!("unknown mode `{other}` (expected matrix or message_passing)"),
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Matrix => "matrix",
            Mode::MessagePassing => "message_passing",
        })
    }
}

pub const DEFAULT_MAX_ITERS: usize = 200_000;
pub const DEFAULT_STOP_TOL: f64 = 2e-16;
/// Window of the stagnation detector.
pub const STAGNATION_WINDOW: usize = 500;
/// Stagnation requires the best squared gradient norm to stay above this multiple of `stop_tol`.
pub const STAGNATION_FLOOR: f64 = 1e6;

/// Termination parameters shared by every driver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub max_iters: usize,
    /// Threshold on `(1/N) ||x_k - x_bar_k||^2`.
    pub stop_tol: f64,
    pub stagnation_window: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        StopRule {
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            stagnation_window: STAGNATION_WINDOW,
        }
    }
}

impl StopRule {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("max_iters", "must be at least 1"));
        }
        if !(self.stop_tol > 0.0 && self.stop_tol.is_finite()) {
            return Err(Error::config(
                "stop",
                format!("must be positive, got {}", self.stop_tol),
            ));
        }
        if self.stagnation_window < 1 {
            return Err(Error::config("stagnation_window", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub graph: GraphSpec,
    pub d: usize,
    pub r: usize,
    pub t: u32,
    pub alpha: AlphaRule,
    pub retraction: Retraction,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl RunConfig {
    /// Ring of 30 agents on `St(5, 2)`, one round, `alpha = 2/(mu+L)`.
    pub fn new(graph: GraphSpec, d: usize, r: usize) -> Self {
        RunConfig {
            graph,
            d,
            r,
            t: 1,
            alpha: AlphaRule::TwoOverMuPlusL,
            retraction: Retraction::Polar,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            seed: 0,
            mode: Mode::Matrix,
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        StopRule {
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            stagnation_window: STAGNATION_WINDOW,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 1 || self.r > self.d {
            return Err(Error::config(
                "r",
                format!("need 1 <= r <= d, got d={}, r={}", self.d, self.r),
            ));
        }
        if self.t < 1 {
            return Err(Error::config("t", "must be at least 1"));
        }
        self.alpha.validate()?;
        self.stop_rule().validate()
    }

    /// Mixing matrix and the resolved stepsize.
    pub fn resolve(&self) -> Result<(MixingMatrix, SpectralProfile, f64)> {
        self.validate()?;
        let w = self.graph.build()?;
        let profile = w.spectral_profile(self.t)?;
        let alpha = self.alpha.resolve(&profile);
        Ok((w, profile, alpha))
    }

    pub fn initial_state(&self) -> Result<NetworkState> {
        NetworkState::random(self.graph.n, self.d, self.r, self.seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TerminalStatus {
    Converged,
    MaxIters,
    Stagnated,
    DegenerateMean,
}

impl TerminalStatus {
    pub fn name(self) -> &'static str {
        match self {
            TerminalStatus::Converged => "converged",
            TerminalStatus::MaxIters => "max_iters",
            TerminalStatus::Stagnated => "stagnated",
            TerminalStatus::DegenerateMean => "degenerate_mean",
        }
    }
}

impl fmt::Display for TerminalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Observables of one iterate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub phi: f64,
    pub grad_norm_sq: f64,
    /// `(1/N) ||x_k - x_bar_k||^2`.
    pub consensus_sq: f64,
    /// `max_i ||x_{i,k} - x_bar_k||_F`.
    pub consensus_inf: f64,
    pub regions: RegionFlags,
}

pub const TRACE_CSV_HEADER: &str =
    "k,phi,grad_norm_sq,consensus_sq,consensus_inf,in_N1,in_N2,in_NR,in_Nl";

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTrace {
    records: Vec<TraceRecord>,
    status: TerminalStatus,
}

impl ConvergenceTrace {
    pub fn new(records: Vec<TraceRecord>, status: TerminalStatus) -> Self {
        ConvergenceTrace { records, status }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn status(&self) -> TerminalStatus {
        self.status
    }

    /// Index of the last recorded iterate.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn consensus_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.consensus_sq).collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        let b = |v: bool| u8::from(v);
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.k,
                r.phi,
                r.grad_norm_sq,
                r.consensus_sq,
                r.consensus_inf,
                b(r.regions.n1),
                b(r.regions.n2),
                b(r.regions.nr),
                b(r.regions.nl)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// Flags the divergent regime: the best squared gradient norm over the last
/// `window` iterates improves on everything before by less than 1% and stays
/// above the floor.
#[derive(Clone, Debug)]
pub struct StagnationDetector {
    window: usize,
    floor: f64,
    history: VecDeque<f64>,
    /// Sliding-window minimum candidates as `(index, value)`, values increasing.
    mins: VecDeque<(usize, f64)>,
    best_before: f64,
    seen: usize,
}

impl StagnationDetector {
    pub fn new(window: usize, floor: f64) -> Self {
        StagnationDetector {
            window,
            floor,
            history: VecDeque::with_capacity(window + 1),
            mins: VecDeque::new(),
            best_before: f64::INFINITY,
            seen: 0,
        }
    }

    /// Feeds one value; returns true once stagnation is detected.
    pub fn push(&mut self, grad_norm_sq: f64) -> bool {
        let idx = self.seen;
        self.seen += 1;
        self.history.push_back(grad_norm_sq);
        while self.mins.back().is_some_and(|&(_, v)| v >= grad_norm_sq) {
            self.mins.pop_back();
        }
        self.mins.push_back((idx, grad_norm_sq));
        if self.history.len() > self.window {
            let leaving = self.history.pop_front().expect("non-empty");
            self.best_before = self.best_before.min(leaving);
            let first_kept = idx + 1 - self.window;
            while self.mins.front().is_some_and(|&(i, _)| i < first_kept) {
                self.mins.pop_front();
            }
        }
        if self.best_before.is_infinite() {
            return false;
        }
        let recent = self.mins.front().expect("non-empty").1;
        recent > 0.99 * self.best_before && recent > self.floor
    }
}

/// One iteration step source for [`drive`].
pub(crate) trait Dynamics {
    fn state(&self) -> NetworkState;
    /// Riemannian gradient at the current state.
    fn gradient(&mut self) -> Result<GradientField>;
    /// Moves along `-alpha * grad`.
    fn advance(&mut self, grad: &GradientField) -> Result<()>;
}

struct MatrixDynamics<'a> {
    w: &'a MixingMatrix,
    t: u32,
    alpha: f64,
    retraction: Retraction,
    x: NetworkState,
}

impl Dynamics for MatrixDynamics<'_> {
    fn state(&self) -> NetworkState {
        self.x.clone()
    }

    fn gradient(&mut self) -> Result<GradientField> {
        drcs_gradient(&self.x, self.w, self.t)
    }

    fn advance(&mut self, grad: &GradientField) -> Result<()> {
        self.x = retract_along(&self.x, grad, self.alpha, self.retraction)?;
        Ok(())
    }
}

/// Observables of `x` given its gradient; `None` when the mean is degenerate.
pub fn observe(
    k: usize,
    x: &NetworkState,
    grad: &GradientField,
    wt: &MixingMatrix,
    mu_t: f64,
    params: &RegionParams,
) -> Result<Option<TraceRecord>> {
    let xbar = match x.iam() {
        Ok(p) => p,
        Err(Error::DegenerateMean { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let dev_sq = dist_sq(x, &xbar);
    let dev_inf = dist_inf(x, &xbar);
    let phi = phi_with_power(x, wt)?;
    Ok(Some(TraceRecord {
        k,
        phi,
        grad_norm_sq: grad.norm_sq(),
        consensus_sq: dev_sq / x.n() as f64,
        consensus_inf: dev_inf,
        regions: RegionFlags::from_quantities(x.n(), dev_sq, dev_inf, phi, mu_t, params),
    }))
}

pub(crate) fn drive<D: Dynamics>(
    dynamics: &mut D,
    w: &MixingMatrix,
    t: u32,
    stop: &StopRule,
) -> Result<(ConvergenceTrace, NetworkState)> {
    stop.validate()?;
    let wt = w.power(t)?;
    let profile = w.spectral_profile(t)?;
    let x0 = dynamics.state();
    let params = RegionParams::maximal(x0.n(), x0.r());
    let mut detector =
        StagnationDetector::new(stop.stagnation_window, STAGNATION_FLOOR * stop.stop_tol);
    let mut records = Vec::new();
    let mut k = 0;
    let status = loop {
        let x = dynamics.state();
        let grad = dynamics.gradient()?;
        let Some(rec) = observe(k, &x, &grad, &wt, profile.mu_t, &params)? else {
            break TerminalStatus::DegenerateMean;
        };
        records.push(rec);
        if rec.consensus_sq <= stop.stop_tol {
            break TerminalStatus::Converged;
        }
        if detector.push(rec.grad_norm_sq) {
            break TerminalStatus::Stagnated;
        }
        if k >= stop.max_iters {
            break TerminalStatus::MaxIters;
        }
        dynamics.advance(&grad)?;
        k += 1;
    };
    Ok((ConvergenceTrace::new(records, status), dynamics.state()))
}

/// Runs the iteration from `x0` with an explicit matrix and stepsize.
pub fn run_drcs_from(
    w: &MixingMatrix,
    x0: NetworkState,
    t: u32,
    alpha: f64,
    retraction: Retraction,
    stop: &StopRule,
) -> Result<(ConvergenceTrace, NetworkState)> {
    AlphaRule::Custom(alpha).validate()?;
    super::gradient::check_network(&x0, w)?;
    let mut dynamics = MatrixDynamics {
        w,
        t,
        alpha,
        retraction,
        x: x0,
    };
    drive(&mut dynamics, w, t, stop)
}

/// Runs a configuration from its seeded random start in the configured mode.
pub fn run_drcs(config: &RunConfig) -> Result<(ConvergenceTrace, NetworkState)> {
    let (w, _, alpha) = config.resolve()?;
    let x0 = config.initial_state()?;
    match config.mode {
        Mode::Matrix => run_drcs_from(
            &w,
            x0,
            config.t,
            alpha,
            config.retraction,
            &config.stop_rule(),
        ),
        Mode::MessagePassing => {
            let mut net = NodeNetwork::new(&w, x0, config.t, alpha, config.retraction)?;
            let (trace, state) = drive(&mut net, &w, config.t, &config.stop_rule())?;
            Ok((trace, state))
        }
    }
}
