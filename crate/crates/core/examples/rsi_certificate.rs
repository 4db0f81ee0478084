//! Samples states near consensus and evaluates the restricted secant
//! inequality, error bound, gradient dominance and quadratic growth there.
//!
//! ```text
//! cargo run --example rsi_certificate
//! ```

use stcon::analysis::{
    check_rsi, CheckTally, Region, RegionParams, RegionSampler, Setting, Snapshot,
};
use stcon::network::ring_matrix;

fn main() -> stcon::Result<()> {
    let (n, d, r, nu) = (30, 5, 2, 0.5);
    let w = ring_matrix(n)?;
    let params = RegionParams::maximal(n, r);
    for t in [1, 164] {
        let setting = Setting::new(&w, t)?;
        for region in [Region::NR, Region::Nl] {
            let sampler = RegionSampler::calibrate(&setting, d, r, params, region, 5)?;
            println!(
                "ring30 t={t} {region}: scale {:.3e}, acceptance {:.2}",
                sampler.scale(),
                sampler.acceptance()
            );
            let mut tallies: Vec<CheckTally> = Vec::new();
            for i in 0..200 {
                let x = sampler.draw(i)?;
                let snap = Snapshot::new(&setting, &x)?;
                for (name, v) in check_rsi(&snap, &setting, &params, nu).verdicts() {
                    match tallies.iter_mut().find(|c| c.name == name) {
                        Some(c) => c.record(v),
                        None => {
                            let mut c = CheckTally::new(name, format!("ring30_t{t}_{region}"));
                            c.record(v);
                            tallies.push(c);
                        }
                    }
                }
            }
            for c in &tallies {
                println!("  {c}");
            }
        }
    }
    Ok(())
}
