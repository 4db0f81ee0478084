//! Neighborhoods of the consensus set on which the linear rate is certified.

use crate::error::{Error, Result};
use crate::manifold::{dist_inf, dist_sq};
use crate::network::MixingMatrix;
use crate::state::NetworkState;

use super::objective::phi_with_power;

/// Radii of the regions `N_1`, `N_2` and the distance cap of `N_l`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionParams {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

impl RegionParams {
    /// The largest admissible radii: `delta2 = 1/6`, `delta1 = delta2 / (5 sqrt r)`,
    /// `delta3 = min(1/sqrt N, 1/(4 sqrt r))`.
    pub fn maximal(n: usize, r: usize) -> Self {
        let delta2 = 1.0 / 6.0;
        RegionParams {
            delta1: Self::delta1_cap(delta2, r),
            delta2,
            delta3: Self::delta3_cap(n, r),
        }
    }

    fn delta1_cap(delta2: f64, r: usize) -> f64 {
        delta2 / (5.0 * (r as f64).sqrt())
    }

    fn delta3_cap(n: usize, r: usize) -> f64 {
        (1.0 / (n as f64).sqrt()).min(1.0 / (4.0 * (r as f64).sqrt()))
    }

    pub fn validate(&self, n: usize, r: usize) -> Result<()> {
        let ok = |v: f64, cap: f64| v > 0.0 && v <= cap * (1.0 + 1e-15);
        if !ok(self.delta2, 1.0 / 6.0) {
            return Err(Error::config(
                "delta2",
                format!("need 0 < delta2 <= 1/6, got {}", self.delta2),
            ));
        }
        let c1 = Self::delta1_cap(self.delta2, r);
        if !ok(self.delta1, c1) {
            return Err(Error::config(
                "delta1",
                format!(
                    "need 0 < delta1 <= delta2/(5 sqrt r) = {c1}, got {}",
                    self.delta1
                ),
            ));
        }
        let c3 = Self::delta3_cap(n, r);
        if !ok(self.delta3, c3) {
            return Err(Error::config(
                "delta3",
                format!(
                    "need 0 < delta3 <= min(1/sqrt N, 1/(4 sqrt r)) = {c3}, got {}",
                    self.delta3
                ),
            ));
        }
        Ok(())
    }
}

/// Membership flags for `N_1`, `N_2`, `N_R = N_1 & N_2` and `N_l`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RegionFlags {
    pub n1: bool,
    pub n2: bool,
    pub nr: bool,
    pub nl: bool,
}

impl RegionFlags {
    /// From `||x - x_bar||^2`, `||x - x_bar||_{F,inf}`, `phi^t` and `mu_t`.
    pub fn from_quantities(
        n: usize,
        dev_sq: f64,
        dev_inf: f64,
        phi: f64,
        mu_t: f64,
        params: &RegionParams,
    ) -> Self {
        let nf = n as f64;
        let n1 = dev_sq <= nf * params.delta1 * params.delta1;
        let n2 = dev_inf <= params.delta2;
        let nl = phi <= mu_t / 4.0 && dev_sq <= nf * params.delta3 * params.delta3;
        RegionFlags {
            n1,
            n2,
            nr: n1 && n2,
            nl,
        }
    }

    pub fn all(&self) -> bool {
        self.n1 && self.n2 && self.nr && self.nl
    }
}

pub fn region_membership(
    state: &NetworkState,
    w: &MixingMatrix,
    t: u32,
    params: &RegionParams,
) -> Result<RegionFlags> {
    let wt = w.power(t)?;
    let mu_t = w.spectral_profile(t)?.mu_t;
    let xbar = state.iam()?;
    Ok(RegionFlags::from_quantities(
        state.n(),
        dist_sq(state, &xbar),
        dist_inf(state, &xbar),
        phi_with_power(state, &wt)?,
        mu_t,
        params,
    ))
}
