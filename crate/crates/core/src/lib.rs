//! Distributed consensus on the Stiefel manifold.
//!
//! Agents on a connected graph each hold an orthonormal frame `x_i` in
//! `St(d, r)` and repeatedly move along the Riemannian gradient of the
//! disagreement potential, using `t` rounds of neighbor communication per
//! iteration. The crate provides the manifold primitives, mixing matrices and
//! their spectral constants, the iteration itself (centralized and as a
//! message-passing simulation), numerical checks of the regularity
//! inequalities behind its linear rate, and an experiment harness.

pub mod analysis;
pub mod consensus;
pub mod error;
pub mod harness;
pub mod manifold;
pub mod network;
pub mod state;

pub use error::{Error, Result};
pub use manifold::{Mat, Retraction, StiefelPoint, TangentVector};
pub use network::{GraphSpec, MixingMatrix, SpectralProfile};
pub use state::NetworkState;
