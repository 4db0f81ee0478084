//! Numerical certificates for the regularity inequalities behind the linear
//! rate, plus rate estimation.

pub mod checks;
pub mod objective;
pub mod rate;
pub mod regions;
pub mod report;
pub mod sampler;

pub use checks::{
    audit_step, check_descent, check_euclidean_rsi, check_grad_bounds, check_hemisphere,
    check_iam_drift, check_key_relation, check_mean_iam, check_polar_perturbation,
    check_retraction, check_rsi, check_tangent_second_order, check_tv_bound, classify_critical,
    default_tol_grad, descent_slope, Bound, Criticality, Sense, Setting, Snapshot, Verdict,
    CHECK_TOL,
};
pub use objective::{fd_gradient_check, h_value, phi_value, phi_with_power, FdCheck};
pub use rate::{estimate_rate, estimate_rate_series, RateEstimate, RateTargets};
pub use regions::{region_membership, RegionFlags, RegionParams};
pub use report::CheckTally;
pub use sampler::{Region, RegionSampler};
