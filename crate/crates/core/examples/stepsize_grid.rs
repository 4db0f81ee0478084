//! The stepsize comparison on ring(30) and its lazy variant, written to a
//! temporary directory together with a gnuplot script.
//!
//! ```text
//! cargo run --release --example stepsize_grid [seed]
//! ```

use stcon::harness::cmd_fig1;

fn main() -> stcon::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(7);
    let dir = std::env::temp_dir().join(format!("stcon-grid-{seed}"));
    let bundle = cmd_fig1(seed, &dir)?;
    println!(
        "{:<44} {:>10} {:>8} {:>12}",
        "run", "status", "iters", "rate"
    );
    for r in &bundle.runs {
        let rate = r
            .rate
            .as_ref()
            .map(|e| format!("{:.5}", e.per_step_ratio))
            .unwrap_or_default();
        println!(
            "{:<44} {:>10} {:>8} {:>12}",
            r.name,
            r.trace.status().to_string(),
            r.trace.iterations(),
            rate
        );
    }
    println!("summary: {}", bundle.summary_path.display());
    println!("plot:    {}", bundle.plot_path.display());
    Ok(())
}
