//! Random initializations on ring(8), St(5, 2): every run should reach consensus.
//!
//! ```text
//! cargo run --release --example random_restarts [runs]
//! ```

use stcon::consensus::{run_drcs, RunConfig, TerminalStatus};
use stcon::network::GraphSpec;

fn main() -> stcon::Result<()> {
    let runs: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(100);
    let mut converged = 0;
    let mut longest = 0;
    for seed in 0..runs {
        let mut c = RunConfig::new(GraphSpec::ring(8), 5, 2);
        c.seed = seed;
        let (trace, _) = run_drcs(&c)?;
        if trace.status() == TerminalStatus::Converged {
            converged += 1;
        } else {
            println!("seed {seed}: {}", trace.status());
        }
        longest = longest.max(trace.iterations());
    }
    println!("{converged}/{runs} converged, longest run {longest} iterations");
    Ok(())
}
