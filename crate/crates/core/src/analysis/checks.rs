//! One-sided inequality checks with explicit slack.
//!
//! Every check reports `lhs`, `rhs` and the slack in the direction of the
//! claim; a check passes when the slack is at least
//! `-CHECK_TOL * (1 + |lhs| + |rhs|)`. Checks whose hypotheses fail report
//! [`Verdict::Skipped`] with the reason instead of passing vacuously.

use crate::consensus::{euclidean_grad_with_power, riemannian_grad, GradientField};
use crate::error::{Error, Result};
use crate::manifold::{
    dist_inf, dist_sq, inner, project_tangent, Mat, Retraction, StiefelPoint, TangentVector,
};
use crate::network::{MixingMatrix, SpectralProfile};
use crate::state::NetworkState;

use super::objective::phi_with_power;
use super::regions::{RegionFlags, RegionParams};

/// Relative tolerance applied to every one-sided comparison.
pub const CHECK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// The claim is `lhs >= rhs`.
    AtLeast,
    /// The claim is `lhs <= rhs`.
    AtMost,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub sense: Sense,
}

impl Bound {
    pub fn at_least(lhs: f64, rhs: f64) -> Self {
        Bound {
            lhs,
            rhs,
            sense: Sense::AtLeast,
        }
    }

    pub fn at_most(lhs: f64, rhs: f64) -> Self {
        Bound {
            lhs,
            rhs,
            sense: Sense::AtMost,
        }
    }

    /// Margin by which the claim holds; negative when violated.
    pub fn slack(&self) -> f64 {
        match self.sense {
            Sense::AtLeast => self.lhs - self.rhs,
            Sense::AtMost => self.rhs - self.lhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.slack() >= -CHECK_TOL * (1.0 + self.lhs.abs() + self.rhs.abs())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Checked(Bound),
    Skipped(String),
}

impl Verdict {
    pub fn skipped(reason: impl Into<String>) -> Self {
        Verdict::Skipped(reason.into())
    }

    /// `None` when skipped.
    pub fn holds(&self) -> Option<bool> {
        match self {
            Verdict::Checked(b) => Some(b.holds()),
            Verdict::Skipped(_) => None,
        }
    }

    pub fn slack(&self) -> Option<f64> {
        match self {
            Verdict::Checked(b) => Some(b.slack()),
            Verdict::Skipped(_) => None,
        }
    }

    pub fn is_skipped(&self) -> bool {
        matches!(self, Verdict::Skipped(_))
    }

    /// True unless checked and violated.
    pub fn not_violated(&self) -> bool {
        self.holds() != Some(false)
    }
}

impl From<Bound> for Verdict {
    fn from(b: Bound) -> Self {
        Verdict::Checked(b)
    }
}

/// A mixing matrix with its `t`-th power and spectral constants.
#[derive(Clone, Debug)]
pub struct Setting {
    pub w: MixingMatrix,
    pub t: u32,
    pub wt: MixingMatrix,
    pub profile: SpectralProfile,
}

impl Setting {
    pub fn new(w: &MixingMatrix, t: u32) -> Result<Self> {
        Ok(Setting {
            w: w.clone(),
            t,
            wt: w.power(t)?,
            profile: w.spectral_profile(t)?,
        })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    pub fn mu_t(&self) -> f64 {
        self.profile.mu_t
    }

    pub fn l_t(&self) -> f64 {
        self.profile.l_t
    }

    pub fn phi(&self, x: &NetworkState) -> Result<f64> {
        phi_with_power(x, &self.wt)
    }

    pub fn grad(&self, x: &NetworkState) -> Result<GradientField> {
        riemannian_grad(x, &self.euclidean_grad(x)?)
    }

    /// Uses the cached `W^t`, which agrees with `t` rounds of mixing.
    pub fn euclidean_grad(&self, x: &NetworkState) -> Result<GradientField> {
        euclidean_grad_with_power(x, &self.wt)
    }
}

/// Quantities of one state shared by several checks.
#[derive(Clone, Debug)]
pub struct Snapshot<'a> {
    pub state: &'a NetworkState,
    pub xbar: StiefelPoint,
    pub xhat: Mat,
    pub egrad: GradientField,
    pub grad: GradientField,
    pub phi: f64,
    /// `||x - x_bar||^2`.
    pub dev_sq: f64,
    /// `||x - x_bar||_{F,inf}`.
    pub dev_inf: f64,
    /// `||x - x_hat||^2`.
    pub euclid_dev_sq: f64,
}

impl<'a> Snapshot<'a> {
    /// Fails with [`Error::DegenerateMean`] when the IAM is undefined.
    pub fn new(setting: &Setting, state: &'a NetworkState) -> Result<Self> {
        let xbar = state.iam()?;
        let egrad = setting.euclidean_grad(state)?;
        let grad = riemannian_grad(state, &egrad)?;
        Ok(Snapshot {
            dev_sq: dist_sq(state, &xbar),
            dev_inf: dist_inf(state, &xbar),
            euclid_dev_sq: state.euclidean_deviation_sq(),
            xhat: state.euclidean_mean(),
            phi: setting.phi(state)?,
            state,
            xbar,
            egrad,
            grad,
        })
    }

    pub fn n(&self) -> usize {
        self.state.n()
    }

    pub fn r(&self) -> usize {
        self.state.r()
    }

    pub fn grad_norm_sq(&self) -> f64 {
        self.grad.norm_sq()
    }

    pub fn regions(&self, setting: &Setting, params: &RegionParams) -> RegionFlags {
        RegionFlags::from_quantities(
            self.n(),
            self.dev_sq,
            self.dev_inf,
            self.phi,
            setting.mu_t(),
            params,
        )
    }

    /// `<x - x_bar, grad phi^t(x)>`.
    pub fn secant(&self) -> f64 {
        let xb = self.xbar.as_matrix();
        self.state
            .matrices()
            .zip(self.grad.blocks())
            .map(|(x, g)| inner(&(x - xb), g))
            .sum()
    }
}

/// Retraction bounds at one `(x, xi)` pair against a reference point `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RetractionReport {
    /// `||Retr_x(xi) - (x + xi)|| <= M ||xi||^2` inside the constant's radius.
    pub second_order: Verdict,
    /// `||Retr_x(xi) - y|| <= ||x + xi - y||`, for the polar retraction.
    pub nonexpansive: Verdict,
}

pub fn check_retraction(
    xi: &TangentVector<'_>,
    y: &StiefelPoint,
    retraction: Retraction,
) -> Result<RetractionReport> {
    let x = xi.base();
    let moved = x.as_matrix() + xi.as_matrix();
    let out = retraction.apply(xi)?;
    let norm = xi.norm();
    let second_order = if norm <= retraction.constant_radius() {
        Bound::at_most(
            (out.as_matrix() - &moved).norm(),
            retraction.second_order_constant() * norm * norm,
        )
        .into()
    } else {
        Verdict::skipped(format!("||xi|| = {norm} above the radius of M"))
    };
    let nonexpansive = match retraction {
        Retraction::Polar => Bound::at_most(
            (out.as_matrix() - y.as_matrix()).norm(),
            (moved - y.as_matrix()).norm(),
        )
        .into(),
        Retraction::Qr => {
            Verdict::skipped("non-expansiveness is a property of the polar retraction")
        }
    };
    Ok(RetractionReport {
        second_order,
        nonexpansive,
    })
}

/// `||P_T_x(x - y) - (x - y)|| <= (1/2) ||x - y||^2` for `x, y` on the manifold.
pub fn check_tangent_second_order(x: &StiefelPoint, y: &StiefelPoint) -> Result<Bound> {
    let diff = x.as_matrix() - y.as_matrix();
    let proj = project_tangent(x, &diff)?;
    Ok(Bound::at_most(
        (proj.as_matrix() - &diff).norm(),
        0.5 * diff.norm_squared(),
    ))
}

/// RSI-1, RSI-2 and RSI-I with the constants of one region.
#[derive(Clone, Debug, PartialEq)]
pub struct RsiTriple {
    pub rsi1: Verdict,
    pub rsi2: Verdict,
    pub rsi_i: Verdict,
}

impl RsiTriple {
    fn skipped(reason: &str) -> Self {
        RsiTriple {
            rsi1: Verdict::skipped(reason),
            rsi2: Verdict::skipped(reason),
            rsi_i: Verdict::skipped(reason),
        }
    }

    fn evaluate(
        lhs: f64,
        gamma: f64,
        big_phi: f64,
        l_t: f64,
        nu: f64,
        dev_sq: f64,
        g2: f64,
    ) -> Self {
        let c_g = big_phi / (2.0 * l_t);
        RsiTriple {
            rsi1: Bound::at_least(lhs, gamma * dev_sq).into(),
            rsi2: Bound::at_least(lhs, c_g * g2).into(),
            rsi_i: Bound::at_least(lhs, nu * c_g * g2 + (1.0 - nu) * gamma * dev_sq).into(),
        }
    }
}

/// Restricted secant, error-bound, dominance and growth inequalities at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct RsiReport {
    /// `<x - x_bar, grad phi^t(x)>`.
    pub lhs: f64,
    pub phi: f64,
    /// `sum_i <p_i, q_i>` with `p_i = (1/2)(x_i - x_bar)^T (x_i - x_bar)` and
    /// `q_i = (1/2) sum_j W^t_ij (x_i - x_j)^T (x_i - x_j)`.
    pub pq_sum: f64,
    /// `|lhs - (2 phi - pq_sum)|`.
    pub decomposition_residual: f64,
    pub gamma_r: f64,
    pub gamma_l: f64,
    /// `2 - ||x - x_bar||_{F,inf}^2`.
    pub big_phi_r: f64,
    /// `2 - ||x - x_bar||^2`.
    pub big_phi_l: f64,
    pub nu: f64,
    pub regions: RegionFlags,
    pub in_nr: RsiTriple,
    pub in_nl: RsiTriple,
    pub erb: Verdict,
    pub dominance: Verdict,
    /// `phi >= (mu_t/2) ||x - x_hat||^2`.
    pub qg: Verdict,
    /// `phi >= (mu_t/4) ||x - x_bar||^2`.
    pub qg_iam: Verdict,
    /// Local growth, when `||x - x_bar||^2 <= N/(8r)`.
    pub qg_local: Verdict,
}

impl RsiReport {
    pub fn verdicts(&self) -> Vec<(&'static str, &Verdict)> {
        vec![
            ("rsi1_NR", &self.in_nr.rsi1),
            ("rsi2_NR", &self.in_nr.rsi2),
            ("rsiI_NR", &self.in_nr.rsi_i),
            ("rsi1_Nl", &self.in_nl.rsi1),
            ("rsi2_Nl", &self.in_nl.rsi2),
            ("rsiI_Nl", &self.in_nl.rsi_i),
            ("erb", &self.erb),
            ("dominance", &self.dominance),
            ("qg", &self.qg),
            ("qg_iam", &self.qg_iam),
            ("qg_local", &self.qg_local),
        ]
    }

    /// No evaluated inequality is violated.
    pub fn satisfied(&self) -> bool {
        self.verdicts().iter().all(|(_, v)| v.not_violated())
    }
}

pub fn pq_sum(snap: &Snapshot<'_>, setting: &Setting) -> f64 {
    let x: Vec<&Mat> = snap.state.matrices().collect();
    let xb = snap.xbar.as_matrix();
    let r = snap.r();
    (0..x.len())
        .map(|i| {
            let dev = x[i] - xb;
            let p = dev.transpose() * &dev * 0.5;
            let mut q = Mat::zeros(r, r);
            for (j, wij) in setting.wt.row_support(i) {
                let diff = x[i] - x[j];
                q += diff.transpose() * &diff * (0.5 * wij);
            }
            inner(&p, &q)
        })
        .sum()
}

pub fn check_rsi(
    snap: &Snapshot<'_>,
    setting: &Setting,
    params: &RegionParams,
    nu: f64,
) -> RsiReport {
    let (n, r) = (snap.n() as f64, snap.r() as f64);
    let (mu_t, l_t) = (setting.mu_t(), setting.l_t());
    let lhs = snap.secant();
    let pq = pq_sum(snap, setting);
    let g2 = snap.grad_norm_sq();
    let regions = snap.regions(setting, params);
    let gamma_r =
        (1.0 - 4.0 * r * params.delta1.powi(2)) * (1.0 - params.delta2.powi(2) / 2.0) * mu_t;
    let gamma_l = mu_t * (1.0 - 4.0 * r * params.delta3.powi(2)) - snap.phi;
    let big_phi_r = 2.0 - snap.dev_inf.powi(2);
    let big_phi_l = 2.0 - snap.dev_sq;
    let in_nr = if regions.nr {
        RsiTriple::evaluate(lhs, gamma_r, big_phi_r, l_t, nu, snap.dev_sq, g2)
    } else {
        RsiTriple::skipped("state outside N_R")
    };
    let in_nl = if regions.nl {
        RsiTriple::evaluate(lhs, gamma_l, big_phi_l, l_t, nu, snap.dev_sq, g2)
    } else {
        RsiTriple::skipped("state outside N_l")
    };
    let in_some = regions.nr || regions.nl;
    let erb = if in_some {
        Bound::at_most(snap.dev_sq.sqrt(), 2.0 / mu_t * g2.sqrt()).into()
    } else {
        Verdict::skipped("state outside N_R and N_l")
    };
    let dominance = if in_some {
        Bound::at_most(snap.phi, 1.5 / mu_t * g2).into()
    } else {
        Verdict::skipped("state outside N_R and N_l")
    };
    let qg_local = if snap.dev_sq <= n / (8.0 * r) {
        Bound::at_least(
            snap.phi,
            mu_t / 2.0 * (1.0 - 4.0 * r / n * snap.dev_sq) * snap.dev_sq,
        )
        .into()
    } else {
        Verdict::skipped("||x - x_bar||^2 > N/(8r)")
    };
    RsiReport {
        lhs,
        phi: snap.phi,
        pq_sum: pq,
        decomposition_residual: (lhs - (2.0 * snap.phi - pq)).abs(),
        gamma_r,
        gamma_l,
        big_phi_r,
        big_phi_l,
        nu,
        regions,
        in_nr,
        in_nl,
        erb,
        dominance,
        qg: Bound::at_least(snap.phi, mu_t / 2.0 * snap.euclid_dev_sq).into(),
        qg_iam: Bound::at_least(snap.phi, mu_t / 4.0 * snap.dev_sq).into(),
        qg_local,
    }
}

/// Restricted strong convexity of the Euclidean potential and the
/// two-sided gradient bound.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanRsiReport {
    /// `<x - x_hat, grad> >= mu L/(mu+L) ||x - x_hat||^2 + 1/(mu+L) ||grad||^2`.
    pub rsi: Bound,
    /// `||grad|| >= mu ||x - x_hat||`.
    pub lower: Bound,
    /// `||grad|| <= L ||x - x_hat||`.
    pub upper: Bound,
}

impl EuclideanRsiReport {
    pub fn satisfied(&self) -> bool {
        self.rsi.holds() && self.lower.holds() && self.upper.holds()
    }
}

/// Checks on an arbitrary ambient stacked state; `w` may be any valid power.
pub fn check_euclidean_rsi(blocks: &[Mat], w: &MixingMatrix) -> Result<EuclideanRsiReport> {
    if blocks.len() != w.n() {
        return Err(Error::ShapeMismatch {
            expected: (w.n(), w.n()),
            got: (blocks.len(), 0),
        });
    }
    let p = w.spectral_profile(1)?;
    let (mu, l) = (p.mu, p.l);
    let mean = crate::manifold::mean_of(blocks.iter());
    let grad: Vec<Mat> = blocks
        .iter()
        .zip(crate::consensus::mix(w, blocks))
        .map(|(x, m)| x - m)
        .collect();
    let dev: Vec<Mat> = blocks.iter().map(|x| x - &mean).collect();
    let lhs: f64 = dev.iter().zip(&grad).map(|(a, b)| inner(a, b)).sum();
    let dev_sq: f64 = dev.iter().map(|d| d.norm_squared()).sum();
    let g2: f64 = grad.iter().map(|g| g.norm_squared()).sum();
    Ok(EuclideanRsiReport {
        rsi: Bound::at_least(lhs, mu * l / (mu + l) * dev_sq + g2 / (mu + l)),
        lower: Bound::at_least(g2.sqrt(), mu * dev_sq.sqrt()),
        upper: Bound::at_most(g2.sqrt(), l * dev_sq.sqrt()),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradBoundsReport {
    /// `||sum_i grad_i|| <= L_t ||x - x_bar||^2`.
    pub sum_bound: Verdict,
    /// `||grad||^2 <= 2 L_t phi`.
    pub norm_bound: Verdict,
    /// `max_i ||grad_i|| <= 2 delta2`, inside `N_2` only.
    pub block_bound: Verdict,
}

impl GradBoundsReport {
    pub fn verdicts(&self) -> [(&'static str, &Verdict); 3] {
        [
            ("grad_sum", &self.sum_bound),
            ("grad_norm", &self.norm_bound),
            ("grad_block", &self.block_bound),
        ]
    }
}

pub fn check_grad_bounds(
    snap: &Snapshot<'_>,
    setting: &Setting,
    params: &RegionParams,
) -> GradBoundsReport {
    let l_t = setting.l_t();
    let block_bound = if snap.dev_inf <= params.delta2 {
        Bound::at_most(snap.grad.max_block_norm(), 2.0 * params.delta2).into()
    } else {
        Verdict::skipped("state outside N_2")
    };
    GradBoundsReport {
        sum_bound: Bound::at_most(snap.grad.sum().norm(), l_t * snap.dev_sq).into(),
        norm_bound: Bound::at_most(snap.grad_norm_sq(), 2.0 * l_t * snap.phi).into(),
        block_bound,
    }
}

/// Relations between the Euclidean mean and the induced arithmetic mean.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanIamReport {
    /// `(1/2) ||x - x_bar||^2 <= ||x - x_hat||^2`.
    pub lower: Verdict,
    /// `||x - x_hat||^2 <= ||x - x_bar||^2`.
    pub upper: Verdict,
    /// `||x_bar - x_hat|| <= 2 sqrt(r) ||x - x_bar||^2 / N`.
    pub mean_gap: Verdict,
    /// `||x - x_hat||^2 >= ||x - x_bar||^2 - 4 r ||x - x_bar||^4 / N`.
    pub refined_lower: Verdict,
}

impl MeanIamReport {
    pub fn verdicts(&self) -> [(&'static str, &Verdict); 4] {
        [
            ("mean_lower", &self.lower),
            ("mean_upper", &self.upper),
            ("mean_gap", &self.mean_gap),
            ("mean_refined", &self.refined_lower),
        ]
    }
}

/// A degenerate mean leaves the IAM undefined; every relation is then skipped.
pub fn check_mean_iam(state: &NetworkState) -> Result<MeanIamReport> {
    let xbar = match state.iam() {
        Ok(p) => p,
        Err(Error::DegenerateMean { .. }) => {
            let reason = "IAM undefined (degenerate Euclidean mean)";
            return Ok(MeanIamReport {
                lower: Verdict::skipped(reason),
                upper: Verdict::skipped(reason),
                mean_gap: Verdict::skipped(reason),
                refined_lower: Verdict::skipped(reason),
            });
        }
        Err(e) => return Err(e),
    };
    let (n, r) = (state.n() as f64, state.r() as f64);
    let dev_sq = dist_sq(state, &xbar);
    let euclid = state.euclidean_deviation_sq();
    let close = dev_sq <= n / 2.0;
    let reason = "||x - x_bar||^2 > N/2";
    Ok(MeanIamReport {
        lower: Bound::at_most(0.5 * dev_sq, euclid).into(),
        upper: Bound::at_most(euclid, dev_sq).into(),
        mean_gap: if close {
            let gap = (xbar.as_matrix() - state.euclidean_mean()).norm();
            Bound::at_most(gap, 2.0 * r.sqrt() * dev_sq / n).into()
        } else {
            Verdict::skipped(reason)
        },
        refined_lower: if close {
            Bound::at_least(euclid, dev_sq - 4.0 * r * dev_sq * dev_sq / n).into()
        } else {
            Verdict::skipped(reason)
        },
    })
}

/// The identity relating Riemannian and Euclidean directional derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyRelation {
    /// `<grad phi^t(x), y - x>`.
    pub riemannian: f64,
    /// `<nabla phi^t(x), y - x>`.
    pub euclidean: f64,
    /// `(1/4) sum_i <sum_j W^t_ij (x_i - x_j)^T (x_i - x_j), (y_i - x_i)^T (y_i - x_i)>`.
    pub correction: f64,
    /// `|riemannian - (euclidean + correction)|`.
    pub residual: f64,
    /// `euclidean <= riemannian`.
    pub inequality: Bound,
}

pub fn check_key_relation(
    x: &NetworkState,
    y: &NetworkState,
    setting: &Setting,
) -> Result<KeyRelation> {
    x.check_compatible(y)?;
    let egrad = setting.euclidean_grad(x)?;
    let grad = riemannian_grad(x, &egrad)?;
    let xs: Vec<&Mat> = x.matrices().collect();
    let step: Vec<Mat> = y.matrices().zip(&xs).map(|(b, a)| b - *a).collect();
    let riemannian = grad.inner_with(&step);
    let euclidean = egrad.inner_with(&step);
    let r = x.r();
    let correction: f64 = (0..xs.len())
        .map(|i| {
            let mut q = Mat::zeros(r, r);
            for (j, wij) in setting.wt.row_support(i) {
                let diff = xs[i] - xs[j];
                q += diff.transpose() * &diff * wij;
            }
            0.25 * inner(&q, &(step[i].transpose() * &step[i]))
        })
        .sum();
    Ok(KeyRelation {
        riemannian,
        euclidean,
        correction,
        residual: (riemannian - (euclidean + correction)).abs(),
        inequality: Bound::at_most(euclidean, riemannian),
    })
}

/// `phi(y) - phi(x) - <grad phi(x), y - x> <= (L_t/2) ||y - x||^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescentReport {
    pub gap: f64,
    pub dist_sq: f64,
    pub bound: Bound,
}

pub fn check_descent(
    x: &NetworkState,
    y: &NetworkState,
    setting: &Setting,
) -> Result<DescentReport> {
    x.check_compatible(y)?;
    let grad = setting.grad(x)?;
    let step: Vec<Mat> = y.matrices().zip(x.matrices()).map(|(b, a)| b - a).collect();
    let gap = setting.phi(y)? - setting.phi(x)? - grad.inner_with(&step);
    let dist_sq = x.distance_sq(y);
    Ok(DescentReport {
        gap,
        dist_sq,
        bound: Bound::at_most(gap, setting.l_t() / 2.0 * dist_sq),
    })
}

/// Least-squares slope through the origin of `gap` against `||y - x||^2`.
pub fn descent_slope(reports: &[DescentReport]) -> f64 {
    let num: f64 = reports.iter().map(|r| r.dist_sq * r.gap).sum();
    let den: f64 = reports.iter().map(|r| r.dist_sq * r.dist_sq).sum();
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// `||x_bar - y_bar|| <= ||x_hat - y_hat|| / (1 - 2 delta1^2)` for `x, y` in `N_1`.
pub fn check_polar_perturbation(
    x: &NetworkState,
    y: &NetworkState,
    params: &RegionParams,
) -> Result<Verdict> {
    x.check_compatible(y)?;
    let (Ok(xbar), Ok(ybar)) = (x.iam(), y.iam()) else {
        return Ok(Verdict::skipped("IAM undefined"));
    };
    let n = x.n() as f64;
    let cap = n * params.delta1 * params.delta1;
    if dist_sq(x, &xbar) > cap || dist_sq(y, &ybar) > cap {
        return Ok(Verdict::skipped("state outside N_1"));
    }
    let lhs = (xbar.as_matrix() - ybar.as_matrix()).norm();
    let mean_gap = (x.euclidean_mean() - y.euclidean_mean()).norm();
    Ok(Bound::at_most(lhs, mean_gap / (1.0 - 2.0 * params.delta1 * params.delta1)).into())
}

/// Drift of the IAM over one step `x_k -> x_{k+1}` taken with stepsize `alpha`:
/// `||x_bar_k - x_bar_{k+1}|| <= (L_t/(1 - 2 delta1^2)) ((alpha + 2 M alpha^2 L_t)/N) ||x_k - x_bar_k||^2`,
/// for `x_k` in `N_R` and `x_{k+1}` in `N_1`.
pub fn check_iam_drift(
    xk: &NetworkState,
    xk1: &NetworkState,
    setting: &Setting,
    alpha: f64,
    retraction: Retraction,
    params: &RegionParams,
) -> Result<Verdict> {
    xk.check_compatible(xk1)?;
    let (Ok(b0), Ok(b1)) = (xk.iam(), xk1.iam()) else {
        return Ok(Verdict::skipped("IAM undefined"));
    };
    let n = xk.n() as f64;
    let dev0 = dist_sq(xk, &b0);
    let in_nr = dev0 <= n * params.delta1.powi(2) && dist_inf(xk, &b0) <= params.delta2;
    if !in_nr || dist_sq(xk1, &b1) > n * params.delta1.powi(2) {
        return Ok(Verdict::skipped("x_k outside N_R or x_{k+1} outside N_1"));
    }
    let (l_t, m) = (setting.l_t(), retraction.second_order_constant());
    let rhs = l_t / (1.0 - 2.0 * params.delta1.powi(2)) * (alpha + 2.0 * m * alpha * alpha * l_t)
        / n
        * dev0;
    Ok(Bound::at_most((b0.as_matrix() - b1.as_matrix()).norm(), rhs).into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TvReport {
    /// `max_i ||sum_j (W^t_ij - 1/N) x_j||`.
    pub lhs: f64,
    /// `sqrt(N) sigma_2^t delta2`, the bound the lemma passes through.
    pub intermediate: f64,
    /// `lhs <= delta2 / 2`, for states in `N_2` with `t >= min_multistep_t`.
    pub bound: Verdict,
}

pub fn check_tv_bound(snap: &Snapshot<'_>, setting: &Setting, params: &RegionParams) -> TvReport {
    let n = snap.n();
    let x: Vec<&Mat> = snap.state.matrices().collect();
    let lhs = (0..n)
        .map(|i| {
            let mut acc = Mat::zeros(snap.state.d(), snap.r());
            for (j, xj) in x.iter().enumerate() {
                acc += *xj * (setting.wt.get(i, j) - 1.0 / n as f64);
            }
            acc.norm()
        })
        .fold(0.0, f64::max);
    let intermediate = (n as f64).sqrt() * setting.profile.sigma2_pow_t() * params.delta2;
    let min_t = setting
        .w
        .spectral_profile(1)
        .map(|p| p.min_multistep_t())
        .unwrap_or(u32::MAX);
    let bound = if snap.dev_inf > params.delta2 {
        Verdict::skipped("state outside N_2")
    } else if setting.t < min_t {
        Verdict::skipped(format!("t = {} below min_multistep_t = {min_t}", setting.t))
    } else {
        Bound::at_most(lhs, params.delta2 / 2.0).into()
    };
    TvReport {
        lhs,
        intermediate,
        bound,
    }
}

/// Classification of a state by first-order criticality and the `l_{F,inf}` test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criticality {
    GlobalOptimum,
    /// Critical, but some block is at distance `>= sqrt 2` from the IAM.
    OutsideL,
    NotCritical,
}

pub fn default_tol_grad(n: usize, r: usize) -> f64 {
    1e-8 * ((n * r) as f64).sqrt()
}

/// Both formulations of membership in `L`: `||x - x_bar||_{F,inf} < sqrt 2`
/// and `min_i <x_i, x_bar> > r - 1`.
pub fn l_membership(snap: &Snapshot<'_>) -> (bool, bool) {
    let by_distance = snap.dev_inf < 2f64.sqrt();
    let xb = snap.xbar.as_matrix();
    let min_inner = snap
        .state
        .matrices()
        .map(|x| inner(x, xb))
        .fold(f64::INFINITY, f64::min);
    (by_distance, min_inner > snap.r() as f64 - 1.0)
}

pub fn classify_critical(snap: &Snapshot<'_>, tol_grad: f64) -> Criticality {
    if snap.grad_norm_sq().sqrt() > tol_grad {
        Criticality::NotCritical
    } else if l_membership(snap).0 {
        Criticality::GlobalOptimum
    } else {
        Criticality::OutsideL
    }
}

/// Invariance of the hemisphere `{<x_i, y> >= delta}` for `r = 1`, polar
/// retraction and `alpha <= 1`: checks `min_{k>=1,i} <x_{i,k}, y> >= delta`
/// with `delta = min_i <x_{i,0}, y>`.
pub fn check_hemisphere(
    setting: &Setting,
    x0: &NetworkState,
    y: &StiefelPoint,
    alpha: f64,
    iters: usize,
) -> Result<Verdict> {
    if x0.r() != 1 {
        return Ok(Verdict::skipped("hemisphere invariance concerns r = 1"));
    }
    if alpha > 1.0 {
        return Ok(Verdict::skipped("alpha > 1"));
    }
    let min_inner = |x: &NetworkState| {
        x.matrices()
            .map(|b| inner(b, y.as_matrix()))
            .fold(f64::INFINITY, f64::min)
    };
    let delta = min_inner(x0);
    if !(delta > 0.0) {
        return Ok(Verdict::skipped(
            "initial state not in an open hemisphere around y",
        ));
    }
    let mut x = x0.clone();
    let mut worst = f64::INFINITY;
    for _ in 0..iters {
        x = crate::consensus::drcs_step(&x, &setting.w, setting.t, alpha, Retraction::Polar)?;
        worst = worst.min(min_inner(&x));
    }
    Ok(Bound::at_least(worst, delta).into())
}

/// Step-level audits along one DRCS step `x -> x_next`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepAudit {
    pub descent: Bound,
    /// `phi(x_next) <= phi(x) + ((M G + L_t/2) alpha^2 - alpha) ||grad||^2` with
    /// `G = ||grad||`, while every block step stays within the radius of `M`.
    pub decrease_bound: Verdict,
    /// `phi(x_next) <= phi(x) - alpha beta ||grad||^2` with `beta = 1/2`, when
    /// `alpha < (1 - beta)/(M G + L_t/2)` and the block steps stay within the radius of `M`.
    pub sufficient_decrease: Verdict,
    /// `||x_next - x_bar_next|| <= ||x - x_bar||` for `x` in `N_R` and `alpha <= Phi/L_t`.
    pub monotone_distance: Verdict,
    /// `||x_next - x_bar_next||^2 <= (1 - 2 alpha (1 - nu) gamma_R) ||x - x_bar||^2`
    /// with the smallest admissible `nu = alpha L_t / Phi`, for `x` in `N_R`.
    pub contraction: Verdict,
    /// `x_next` in `N_R` for `x` in `N_R`, `alpha <= min(Phi/L_t, 1, 1/M)` and
    /// `t >= min_multistep_t`, as `max(dev^2/(N delta1^2), dev_inf/delta2) <= 1`.
    pub stays_in_nr: Verdict,
    pub iam_drift: Verdict,
}

impl StepAudit {
    pub fn verdicts(&self) -> Vec<(&'static str, Verdict)> {
        vec![
            ("step_descent", Verdict::Checked(self.descent)),
            ("step_decrease_bound", self.decrease_bound.clone()),
            ("step_sufficient_decrease", self.sufficient_decrease.clone()),
            ("step_monotone_distance", self.monotone_distance.clone()),
            ("step_contraction", self.contraction.clone()),
            ("step_stays_in_NR", self.stays_in_nr.clone()),
            ("step_iam_drift", self.iam_drift.clone()),
        ]
    }
}

pub fn audit_step(
    x: &NetworkState,
    x_next: &NetworkState,
    setting: &Setting,
    alpha: f64,
    retraction: Retraction,
    params: &RegionParams,
) -> Result<StepAudit> {
    let descent = check_descent(x, x_next, setting)?.bound;
    let snap = Snapshot::new(setting, x)?;
    let g2 = snap.grad_norm_sq();
    let m = retraction.second_order_constant();
    let within_radius = alpha * snap.grad.max_block_norm() <= retraction.constant_radius();
    let phi_next = setting.phi(x_next)?;
    let curvature = m * g2.sqrt() + setting.l_t() / 2.0;
    let decrease_bound = if within_radius {
        Bound::at_most(
            phi_next,
            snap.phi + (curvature * alpha * alpha - alpha) * g2,
        )
        .into()
    } else {
        Verdict::skipped("alpha ||grad_i|| beyond the radius of M")
    };
    let beta = 0.5;
    let sufficient_decrease = if !within_radius {
        Verdict::skipped("alpha ||grad_i|| beyond the radius of M")
    } else if alpha >= (1.0 - beta) / curvature {
        Verdict::skipped("alpha above (1 - beta)/(M G + L_t/2)")
    } else {
        Bound::at_most(phi_next, snap.phi - alpha * beta * g2).into()
    };
    let regions = snap.regions(setting, params);
    let big_phi = 2.0 - snap.dev_inf.powi(2);
    let l_t = setting.l_t();
    let n = x.n() as f64;
    let next_bar = x_next.iam()?;
    let next_dev = dist_sq(x_next, &next_bar);
    let monotone_distance = if regions.nr && alpha <= big_phi / l_t {
        Bound::at_most(next_dev, snap.dev_sq).into()
    } else {
        Verdict::skipped("x outside N_R or alpha > Phi/L_t")
    };
    let contraction = if regions.nr && alpha < big_phi / l_t {
        let nu = alpha * l_t / big_phi;
        let gamma = (1.0 - 4.0 * x.r() as f64 * params.delta1.powi(2))
            * (1.0 - params.delta2.powi(2) / 2.0)
            * setting.mu_t();
        Bound::at_most(
            next_dev,
            (1.0 - 2.0 * alpha * (1.0 - nu) * gamma) * snap.dev_sq,
        )
        .into()
    } else {
        Verdict::skipped("x outside N_R or alpha >= Phi/L_t")
    };
    let min_t = crate::network::min_multistep_t(&setting.w)?;
    let alpha_cap = (big_phi / l_t).min(1.0).min(1.0 / m);
    let stays_in_nr = if !regions.nr {
        Verdict::skipped("x outside N_R")
    } else if alpha > alpha_cap {
        Verdict::skipped("alpha > min(Phi/L_t, 1, 1/M)")
    } else if setting.t < min_t {
        Verdict::skipped(format!("t = {} below min_multistep_t = {min_t}", setting.t))
    } else {
        let ratio = (next_dev / (n * params.delta1.powi(2)))
            .max(dist_inf(x_next, &next_bar) / params.delta2);
        Bound::at_most(ratio, 1.0).into()
    };
    let iam_drift = check_iam_drift(x, x_next, setting, alpha, retraction, params)?;
    Ok(StepAudit {
        descent,
        decrease_bound,
        sufficient_decrease,
        monotone_distance,
        contraction,
        stays_in_nr,
        iam_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::drcs_gradient;
    use crate::manifold::random_stiefel;
    use crate::network::{complete_matrix, ring_matrix};

    fn col(v: &[f64]) -> StiefelPoint {
        StiefelPoint::new(Mat::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn bounds_and_tolerance() {
        assert!(Bound::at_least(1.0, 1.0).holds());
        assert!(Bound::at_least(1.0, 1.0 + 1e-13).holds());
        assert!(!Bound::at_least(1.0, 1.0 + 1e-9).holds());
        assert_eq!(Bound::at_most(1.0, 3.0).slack(), 2.0);
        assert_eq!(Verdict::skipped("x").holds(), None);
        assert!(Verdict::skipped("x").not_violated());
    }

    #[test]
    fn consensus_state_is_tight_everywhere() {
        let w = ring_matrix(6).unwrap();
        let s = Setting::new(&w, 1).unwrap();
        let x = NetworkState::consensus(&random_stiefel(4, 2, 1).unwrap(), 6).unwrap();
        let snap = Snapshot::new(&s, &x).unwrap();
        let p = RegionParams::maximal(6, 2);
        let rep = check_rsi(&snap, &s, &p, 0.5);
        assert!(rep.lhs.abs() < 1e-15);
        assert!(rep.satisfied());
        assert!(rep.verdicts().iter().all(|(_, v)| !v.is_skipped()));
        let gb = check_grad_bounds(&snap, &s, &p);
        assert!(gb.verdicts().iter().all(|(_, v)| v.holds() == Some(true)));
        assert_eq!(
            classify_critical(&snap, default_tol_grad(6, 2)),
            Criticality::GlobalOptimum
        );
        let kr = check_key_relation(&x, &x, &s).unwrap();
        assert_eq!(kr.residual, 0.0);
        let d = check_descent(&x, &x, &s).unwrap();
        assert!(d.bound.holds());
        assert_eq!(
            check_polar_perturbation(&x, &x, &p).unwrap().holds(),
            Some(true)
        );
    }

    #[test]
    fn decomposition_is_an_identity() {
        let w = ring_matrix(7).unwrap();
        for t in [1, 3] {
            let s = Setting::new(&w, t).unwrap();
            for seed in 0..50 {
                let x = NetworkState::random(7, 5, 2, seed).unwrap();
                let snap = Snapshot::new(&s, &x).unwrap();
                let rep = check_rsi(&snap, &s, &RegionParams::maximal(7, 2), 0.5);
                assert!(rep.decomposition_residual < 1e-10);
                assert!(rep.pq_sum >= 0.0);
            }
        }
    }

    #[test]
    fn euclidean_rsi_single_mode_equality() {
        // x = u_2 (x) c: the mu-side bound is attained.
        let w = ring_matrix(10).unwrap();
        let eig = nalgebra::SymmetricEigen::new(w.entries().clone());
        let mut idx: Vec<usize> = (0..10).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let u2 = eig.eigenvectors.column(idx[1]);
        let c = Mat::from_row_slice(2, 1, &[0.6, -0.8]);
        let blocks: Vec<Mat> = (0..10).map(|i| &c * u2[i]).collect();
        let rep = check_euclidean_rsi(&blocks, &w).unwrap();
        assert!(rep.satisfied());
        assert!(rep.lower.slack().abs() < 1e-12);

        let consensus: Vec<Mat> = (0..10).map(|_| c.clone()).collect();
        let rep = check_euclidean_rsi(&consensus, &w).unwrap();
        assert!(rep.rsi.lhs.abs() < 1e-15 && rep.rsi.rhs.abs() < 1e-15);
    }

    #[test]
    fn antipodal_pair_skips_mean_relations() {
        let x = NetworkState::new(vec![col(&[1.0, 0.0]), col(&[-1.0, 0.0])]).unwrap();
        let rep = check_mean_iam(&x).unwrap();
        assert!(rep.verdicts().iter().all(|(_, v)| v.is_skipped()));
    }

    #[test]
    fn equally_spaced_circle_is_a_degenerate_saddle() {
        let w = ring_matrix(4).unwrap();
        let x = NetworkState::new(vec![
            col(&[1.0, 0.0]),
            col(&[0.0, 1.0]),
            col(&[-1.0, 0.0]),
            col(&[0.0, -1.0]),
        ])
        .unwrap();
        assert!(drcs_gradient(&x, &w, 1).unwrap().norm_sq() < 1e-30);
        let s = Setting::new(&w, 1).unwrap();
        assert!(matches!(
            Snapshot::new(&s, &x),
            Err(Error::DegenerateMean { .. })
        ));
    }

    #[test]
    fn random_states_are_not_critical() {
        let w = ring_matrix(6).unwrap();
        let s = Setting::new(&w, 1).unwrap();
        let x = NetworkState::random(6, 5, 2, 4).unwrap();
        let snap = Snapshot::new(&s, &x).unwrap();
        assert_eq!(
            classify_critical(&snap, default_tol_grad(6, 2)),
            Criticality::NotCritical
        );
        let (a, b) = l_membership(&snap);
        assert_eq!(a, b);
    }

    #[test]
    fn retraction_bounds_hold_for_small_steps() {
        use crate::manifold::random_tangent;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let x = random_stiefel(5, 2, 1).unwrap();
        let y = random_stiefel(5, 2, 2).unwrap();
        for s in [0.01, 0.3, 1.0] {
            let v = random_tangent(&mut rng, &x);
            let v = v.scaled(s / v.norm());
            let rep = check_retraction(&v, &y, Retraction::Polar).unwrap();
            assert_eq!(rep.second_order.holds(), Some(true));
            assert_eq!(rep.nonexpansive.holds(), Some(true));
            let rep = check_retraction(&v, &y, Retraction::Qr).unwrap();
            assert_eq!(rep.second_order.is_skipped(), s > 0.5);
            assert!(rep.nonexpansive.is_skipped());
        }
        assert!(check_tangent_second_order(&x, &y).unwrap().holds());
    }

    #[test]
    fn tv_bound_cases() {
        let p = RegionParams::maximal(30, 2);
        let center = random_stiefel(5, 2, 2).unwrap();
        let x = NetworkState::consensus(&center, 30).unwrap();

        let j = complete_matrix(30).unwrap();
        let sj = Setting::new(&j, 1).unwrap();
        let rep = check_tv_bound(&Snapshot::new(&sj, &x).unwrap(), &sj, &p);
        assert!(rep.lhs < 1e-14);
        assert_eq!(rep.bound.holds(), Some(true));

        let w = ring_matrix(30).unwrap();
        let s1 = Setting::new(&w, 1).unwrap();
        let rep = check_tv_bound(&Snapshot::new(&s1, &x).unwrap(), &s1, &p);
        assert!(rep.intermediate > p.delta2 / 2.0);
        assert!(rep.bound.is_skipped());

        let s164 = Setting::new(&w, 164).unwrap();
        let rep = check_tv_bound(&Snapshot::new(&s164, &x).unwrap(), &s164, &p);
        assert!(rep.intermediate <= p.delta2 / 2.0);
        assert_eq!(rep.bound.holds(), Some(true));
    }
}
