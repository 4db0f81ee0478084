//! Finite differences of the consensus potential along retraction curves
//! against the Riemannian gradient.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use stcon::analysis::fd_gradient_check;
use stcon::network::ring_matrix;
use stcon::NetworkState;

fn main() -> stcon::Result<()> {
    let w = ring_matrix(30)?;
    for t in [1, 10] {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let x = NetworkState::random(30, 5, 2, seed)?;
            worst = worst.max(fd_gradient_check(&x, &w, t, 5, 1e-6, seed)?.max_rel_error);
        }
        println!("t={t:<3} worst relative error {worst:e}");
    }
    Ok(())
}
