//! Stacked configuration of all agents.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifold::{self, random_stiefel_with, Mat, StiefelPoint};

/// `x = (x_1, ..., x_N)` with every `x_i` on the same `St(d, r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkState {
    blocks: Vec<StiefelPoint>,
}

impl NetworkState {
    pub fn new(blocks: Vec<StiefelPoint>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::InvalidDimensions(format!(
                "a network state needs at least 2 agents, got {}",
                blocks.len()
            )));
        }
        let shape = blocks[0].shape();
        if let Some(b) = blocks.iter().find(|b| b.shape() != shape) {
            return Err(Error::ShapeMismatch {
                expected: shape,
                got: b.shape(),
            });
        }
        Ok(NetworkState { blocks })
    }

    /// `N` independent uniform draws from one seeded stream.
    pub fn random(n: usize, d: usize, r: usize, seed: u64) -> Result<Self> {
        Self::random_with(&mut ChaCha8Rng::seed_from_u64(seed), n, d, r)
    }

    pub fn random_with<R: Rng + ?Sized>(rng: &mut R, n: usize, d: usize, r: usize) -> Result<Self> {
        let blocks = (0..n)
            .map(|_| random_stiefel_with(rng, d, r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(blocks)
    }

    /// Every agent holds `point`.
    pub fn consensus(point: &StiefelPoint, n: usize) -> Result<Self> {
        Self::new(vec![point.clone(); n])
    }

    pub fn n(&self) -> usize {
        self.blocks.len()
    }

    pub fn d(&self) -> usize {
        self.blocks[0].d()
    }

    pub fn r(&self) -> usize {
        self.blocks[0].r()
    }

    pub fn blocks(&self) -> &[StiefelPoint] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &StiefelPoint {
        &self.blocks[i]
    }

    pub fn into_blocks(self) -> Vec<StiefelPoint> {
        self.blocks
    }

    pub fn matrices(&self) -> impl ExactSizeIterator<Item = &Mat> {
        self.blocks.iter().map(|b| b.as_matrix())
    }

    pub fn euclidean_mean(&self) -> Mat {
        manifold::euclidean_mean(self)
    }

    pub fn iam(&self) -> Result<StiefelPoint> {
        manifold::iam(self)
    }

    /// `||x - x_bar||_F^2` with the IAM as the reference point.
    pub fn deviation_sq(&self) -> Result<f64> {
        Ok(manifold::dist_sq(self, &self.iam()?))
    }

    /// `sum_i ||x_i - x_hat||_F^2`.
    pub fn euclidean_deviation_sq(&self) -> f64 {
        let mean = self.euclidean_mean();
        self.matrices().map(|b| (b - &mean).norm_squared()).sum()
    }

    /// `||x - y||_F^2` summed over blocks.
    pub fn distance_sq(&self, other: &NetworkState) -> f64 {
        self.matrices()
            .zip(other.matrices())
            .map(|(a, b)| (a - b).norm_squared())
            .sum()
    }

    /// Largest entrywise difference between two states.
    pub fn max_abs_diff(&self, other: &NetworkState) -> f64 {
        self.matrices()
            .zip(other.matrices())
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_compatible(&self, other: &NetworkState) -> Result<()> {
        if self.n() != other.n() {
            return Err(Error::ShapeMismatch {
                expected: (self.n(), 0),
                got: (other.n(), 0),
            });
        }
        if self.block(0).shape() != other.block(0).shape() {
            return Err(Error::ShapeMismatch {
                expected: self.block(0).shape(),
                got: other.block(0).shape(),
            });
        }
        Ok(())
    }
}
