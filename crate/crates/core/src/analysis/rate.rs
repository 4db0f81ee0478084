//! Terminal-phase linear rate estimation.

use std::ops::Range;

use crate::consensus::ConvergenceTrace;
use crate::error::{Error, Result};
use crate::network::SpectralProfile;

use super::regions::RegionParams;

/// Iterations a trace must span before a rate is estimated.
pub const MIN_RATE_ITERATIONS: usize = 50;

/// Default fraction of the pre-stop iterations used as the window.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.2;

/// Theoretical per-step contraction factors of `||x_k - x_bar_k||`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateTargets {
    /// `sigma_2^t`, the rate of the unit stepsize.
    pub sigma2_pow_t: f64,
    /// `(L_t - mu_t)/(L_t + mu_t)`, the rate of `alpha = 2/(mu_t + L_t)`.
    pub condition_rate: f64,
    /// `sqrt(1 - 2 alpha (1 - nu) gamma_R)`; `None` when the factor leaves `[0, 1)`.
    pub theorem_rate: Option<f64>,
}

impl RateTargets {
    pub fn new(
        profile: &SpectralProfile,
        alpha: f64,
        nu: f64,
        r: usize,
        params: &RegionParams,
    ) -> Self {
        let gamma = (1.0 - 4.0 * r as f64 * params.delta1.powi(2))
            * (1.0 - params.delta2.powi(2) / 2.0)
            * profile.mu_t;
        let factor = 1.0 - 2.0 * alpha * (1.0 - nu) * gamma;
        RateTargets {
            sigma2_pow_t: profile.sigma2_pow_t(),
            condition_rate: profile.condition_rate(),
            theorem_rate: (0.0..1.0).contains(&factor).then(|| factor.sqrt()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    /// Geometric mean of `sqrt(c_{k+1} / c_k)` over the window.
    pub per_step_ratio: f64,
    /// Iteration indices `k` whose ratio to `k + 1` enters the mean.
    pub window: Range<usize>,
    pub targets: Option<RateTargets>,
}

impl RateEstimate {
    /// `|ratio / target - 1|`.
    pub fn relative_error(&self, target: f64) -> f64 {
        (self.per_step_ratio / target - 1.0).abs()
    }
}

/// Rate from a series `c_0, ..., c_K` of squared consensus distances. The
/// window covers the last `max(1, floor(fraction K))` steps.
pub fn estimate_rate_series(series: &[f64], fraction: f64) -> Result<RateEstimate> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(
            "window_fraction",
            format!("must lie in (0, 1], got {fraction}"),
        ));
    }
    let k = series.len().saturating_sub(1);
    if k < MIN_RATE_ITERATIONS {
        return Err(Error::TraceTooShort {
            have: k,
            need: MIN_RATE_ITERATIONS,
        });
    }
    let len = ((fraction * k as f64).floor() as usize).max(1);
    let window = k - len..k;
    let mut log_sum = 0.0;
    for i in window.clone() {
        let (a, b) = (series[i], series[i + 1]);
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::config(
                "trace",
                format!(
                    "consensus distance vanishes at k = {} inside the rate window",
                    if a > 0.0 { i + 1 } else { i }
                ),
            ));
        }
        log_sum += 0.5 * (b / a).ln();
    }
    Ok(RateEstimate {
        per_step_ratio: (log_sum / len as f64).exp(),
        window,
        targets: None,
    })
}

pub fn estimate_rate(
    trace: &ConvergenceTrace,
    fraction: f64,
    targets: Option<RateTargets>,
) -> Result<RateEstimate> {
    let mut est = estimate_rate_series(&trace.consensus_series(), fraction)?;
    est.targets = targets;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ring_matrix;

    #[test]
    fn exact_geometric_series() {
        let rho: f64 = 0.93;
        let series: Vec<f64> = (0..200).map(|k| 3.0 * rho.powi(2 * k)).collect();
        let est = estimate_rate_series(&series, 0.2).unwrap();
        assert!((est.per_step_ratio - rho).abs() < 1e-12);
        assert_eq!(est.window, 160..199);
    }

    #[test]
    fn short_and_degenerate_series() {
        assert!(matches!(
            estimate_rate_series(&[1.0; 50], 0.2),
            Err(Error::TraceTooShort { have: 49, need: 50 })
        ));
        let mut s = vec![1.0; 60];
        s[59] = 0.0;
        assert!(estimate_rate_series(&s, 0.2).is_err());
        assert!(estimate_rate_series(&[1.0; 60], 0.0).is_err());
    }

    #[test]
    fn targets_for_ring30() {
        let p = ring_matrix(30).unwrap().spectral_profile(1).unwrap();
        let t = RateTargets::new(&p, 1.0, 0.5, 2, &RegionParams::maximal(30, 2));
        assert!((t.sigma2_pow_t - 0.9854317).abs() < 1e-6);
        assert!((t.condition_rate - 0.97839).abs() < 1e-5);
        let th = t.theorem_rate.unwrap();
        assert!(th > t.sigma2_pow_t && th < 1.0);
    }
}
