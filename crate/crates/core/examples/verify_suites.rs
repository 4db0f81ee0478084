//! A quick pass of the verification campaigns with few samples per check.
//!
//! ```text
//! cargo run --release --example verify_suites [samples]
//! ```

use stcon::harness::{run_verify, Suite, VerifyOptions};

fn main() -> stcon::Result<()> {
    let samples = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);
    let report = run_verify(&VerifyOptions::new(Suite::ALL.to_vec(), 1, samples))?;
    print!("{report}");
    println!("failures: {}", report.failures().len());
    Ok(())
}
