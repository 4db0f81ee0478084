//! Spectral constants of a few mixing matrices and the stepsizes they induce.
//!
//! ```text
//! cargo run --example spectra
//! ```

use stcon::harness::cmd_spectra;
use stcon::network::GraphSpec;

fn main() -> stcon::Result<()> {
    let graphs = [
        (GraphSpec::ring(30), 1),
        (GraphSpec::ring(30).lazy(true), 1),
        (GraphSpec::ring(30), 10),
        (GraphSpec::complete(8), 1),
    ];
    for (graph, t) in graphs {
        println!("{}", cmd_spectra(&graph, t)?);
    }
    Ok(())
}
