//! Rejection sampling of network states inside the certified regions.
//!
//! A draw retracts independent tangent noise at a random consensus point;
//! block `i` moves by `s * u_i` with `u_i ~ U(0, 1)`. The scale `s` is
//! calibrated by bisection so that at least [`TARGET_ACCEPTANCE`] of draws
//! land in the target region. Sample `k` of a campaign uses its own ChaCha
//! stream of the master seed, so campaigns split across threads reproduce
//! the sequential result.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::{random_stiefel_with, random_tangent, Retraction};
use crate::state::NetworkState;

use super::checks::{Setting, Snapshot};
use super::regions::RegionParams;

pub const TARGET_ACCEPTANCE: f64 = 0.3;
const PILOT_DRAWS: usize = 64;
const BISECTION_STEPS: usize = 30;
const MAX_ATTEMPTS: usize = 10_000;
const CALIBRATION_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    /// Uniform random states; no rejection.
    Anywhere,
    N1,
    N2,
    NR,
    Nl,
    /// `||x - x_bar||^2 <= N/2`, where the refined mean relations apply.
    MeanPrecondition,
}

impl Region {
    pub fn name(self) -> &'static str {
        match self {
            Region::Anywhere => "anywhere",
            Region::N1 => "N1",
            Region::N2 => "N2",
            Region::NR => "NR",
            Region::Nl => "Nl",
            Region::MeanPrecondition => "mean_pre",
        }
    }

    pub fn contains(self, snap: &Snapshot<'_>, setting: &Setting, params: &RegionParams) -> bool {
        let f = snap.regions(setting, params);
        match self {
            Region::Anywhere => true,
            Region::N1 => f.n1,
            Region::N2 => f.n2,
            Region::NR => f.nr,
            Region::Nl => f.nl,
            Region::MeanPrecondition => snap.dev_sq <= snap.n() as f64 / 2.0,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Region::Anywhere,
            Region::N1,
            Region::N2,
            Region::NR,
            Region::Nl,
            Region::MeanPrecondition,
        ]
        .into_iter()
        .find(|r| r.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::config("region", format!("unknown region {s:?}")))
    }
}

/// Independent generator for sample `index` of the campaign seeded by `master`.
pub fn sample_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// A random consensus point with per-block tangent noise of norm `scale * U(0, 1)`.
pub fn perturbed_consensus<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    d: usize,
    r: usize,
    scale: f64,
) -> Result<NetworkState> {
    let center = random_stiefel_with(rng, d, r)?;
    let blocks = (0..n)
        .map(|_| {
            let v = random_tangent(rng, &center);
            let norm = v.norm();
            let len = scale * rng.random::<f64>();
            let v = if norm > 0.0 { v.scaled(len / norm) } else { v };
            Retraction::Polar.apply(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkState::new(blocks)
}

/// Calibrated sampler for one region of one configuration.
#[derive(Clone, Debug)]
pub struct RegionSampler<'a> {
    setting: &'a Setting,
    params: RegionParams,
    d: usize,
    r: usize,
    region: Region,
    master: u64,
    scale: f64,
    acceptance: f64,
}

impl<'a> RegionSampler<'a> {
    pub fn calibrate(
        setting: &'a Setting,
        d: usize,
        r: usize,
        params: RegionParams,
        region: Region,
        master: u64,
    ) -> Result<Self> {
        params.validate(setting.n(), r)?;
        let mut s = RegionSampler {
            setting,
            params,
            d,
            r,
            region,
            master,
            scale: 0.0,
            acceptance: 1.0,
        };
        if region == Region::Anywhere {
            return Ok(s);
        }
        // Largest scale (on a log grid) whose pilot acceptance meets the target.
        let (mut lo, mut hi) = (1e-8f64.ln(), 4f64.ln());
        let acc_hi = s.pilot_acceptance(hi.exp())?;
        if acc_hi >= TARGET_ACCEPTANCE {
            s.scale = hi.exp();
            s.acceptance = acc_hi;
            return Ok(s);
        }
        let mut acc_lo = s.pilot_acceptance(lo.exp())?;
        if acc_lo < TARGET_ACCEPTANCE {
            return Err(Error::config(
                "region",
                format!("cannot reach {TARGET_ACCEPTANCE} acceptance for {region}"),
            ));
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let acc = s.pilot_acceptance(mid.exp())?;
            if acc >= TARGET_ACCEPTANCE {
                lo = mid;
                acc_lo = acc;
            } else {
                hi = mid;
            }
        }
        s.scale = lo.exp();
        s.acceptance = acc_lo;
        Ok(s)
    }

    fn pilot_acceptance(&self, scale: f64) -> Result<f64> {
        let mut rng = sample_rng(self.master, CALIBRATION_STREAM);
        let mut hits = 0;
        for _ in 0..PILOT_DRAWS {
            let x = perturbed_consensus(&mut rng, self.setting.n(), self.d, self.r, scale)?;
            if self.accepts(&x)? {
                hits += 1;
            }
        }
        Ok(hits as f64 / PILOT_DRAWS as f64)
    }

    fn accepts(&self, x: &NetworkState) -> Result<bool> {
        match Snapshot::new(self.setting, x) {
            Ok(snap) => Ok(self.region.contains(&snap, self.setting, &self.params)),
            Err(Error::DegenerateMean { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Pilot acceptance at the calibrated scale.
    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    pub fn params(&self) -> &RegionParams {
        &self.params
    }

    /// Sample `index`, drawn by rejection from its own stream.
    pub fn draw(&self, index: u64) -> Result<NetworkState> {
        let mut rng = sample_rng(self.master, index);
        let n = self.setting.n();
        if self.region == Region::Anywhere {
            return NetworkState::random_with(&mut rng, n, self.d, self.r);
        }
        for _ in 0..MAX_ATTEMPTS {
            let x = perturbed_consensus(&mut rng, n, self.d, self.r, self.scale)?;
            if self.accepts(&x)? {
                return Ok(x);
            }
        }
        Err(Error::config(
            "region",
            format!("no {} sample after {MAX_ATTEMPTS} attempts", self.region),
        ))
    }
}
