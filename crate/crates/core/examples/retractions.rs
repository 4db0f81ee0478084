//! Polar and QR retractions: distance to the first-order step and
//! non-expansiveness toward a fixed point of the manifold.
//!
//! ```text
//! cargo run --example retractions
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stcon::analysis::check_retraction;
use stcon::manifold::{random_stiefel_with, random_tangent};
use stcon::Retraction;

fn main() -> stcon::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    println!(
        "{:>8} {:>14} {:>14} {:>14}",
        "||xi||", "polar slack", "qr slack", "nonexp slack"
    );
    for scale in [1e-3, 1e-2, 0.1, 0.5, 1.0] {
        let x = random_stiefel_with(&mut rng, 5, 2)?;
        let y = random_stiefel_with(&mut rng, 5, 2)?;
        let v = random_tangent(&mut rng, &x);
        let xi = v.scaled(scale / v.norm());
        let polar = check_retraction(&xi, &y, Retraction::Polar)?;
        let qr = check_retraction(&xi, &y, Retraction::Qr)?;
        println!(
            "{scale:>8} {:>14.3e} {:>14.3e} {:>14.3e}",
            polar.second_order.slack().unwrap_or(f64::NAN),
            qr.second_order.slack().unwrap_or(f64::NAN),
            polar.nonexpansive.slack().unwrap_or(f64::NAN),
        );
    }
    Ok(())
}
