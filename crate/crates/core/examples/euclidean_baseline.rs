//! Projected gradient descent on the Euclidean consensus problem: per-step
//! contraction against sigma_2 and the terminal rate of the tuned stepsize.
//!
//! ```text
//! cargo run --example euclidean_baseline
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stcon::analysis::estimate_rate_series;
use stcon::consensus::{run_euclidean_pgd, Projection};
use stcon::manifold::gaussian_matrix;
use stcon::network::ring_matrix;

fn main() -> stcon::Result<()> {
    let n = 10;
    let w = ring_matrix(n)?;
    let p = w.spectral_profile(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x0: Vec<_> = (0..n).map(|_| gaussian_matrix(&mut rng, 5, 2)).collect();
    for (label, alpha, target) in [
        ("alpha=1", 1.0, p.sigma2),
        ("alpha=2/(mu+L)", 2.0 / (p.mu_t + p.l_t), p.condition_rate()),
    ] {
        let trace = run_euclidean_pgd(x0.clone(), &w, alpha, Projection::Ball(1.0), 150)?;
        let worst = trace.contractions().into_iter().fold(0.0, f64::max);
        let rate = estimate_rate_series(&trace.consensus_series(), 0.2)?;
        println!(
            "{label:<16} worst step {worst:.6}  terminal {rate:.6}  target {target:.6}",
            rate = rate.per_step_ratio
        );
    }
    Ok(())
}
