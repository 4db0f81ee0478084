//! Runs the per-agent message-passing simulation next to the matrix
//! iteration and audits who talked to whom.
//!
//! ```text
//! cargo run --example message_passing
//! ```

use stcon::consensus::{drcs_step, NodeNetwork};
use stcon::network::ring_matrix;
use stcon::{NetworkState, Retraction};

fn main() -> stcon::Result<()> {
    let (n, d, r, t, alpha) = (8, 5, 2, 3, 1.0);
    let w = ring_matrix(n)?;
    let x0 = NetworkState::random(n, d, r, 11)?;
    let mut net = NodeNetwork::new(&w, x0.clone(), t, alpha, Retraction::Polar)?;
    let mut x = x0;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        x = drcs_step(&x, &w, t, alpha, Retraction::Polar)?;
        net.step()?;
        worst = worst.max(net.state().max_abs_diff(&x));
    }
    let audit = net.log().audit(&w, t);
    println!("iterations            {}", net.iteration());
    println!("max entry difference  {worst:e}");
    println!("deliveries            {}", audit.deliveries);
    println!("per iteration         {}", audit.expected_per_iteration);
    println!("non-neighbor reads    {}", audit.non_neighbor);
    println!("clean                 {}", audit.clean());
    Ok(())
}
