//! Spectral constants and stepsize menu of a mixing matrix.

use std::fmt;

use crate::consensus::AlphaRule;
use crate::error::Result;
use crate::network::{min_multistep_t, GraphSpec, SpectralProfile};

#[derive(Clone, Debug, PartialEq)]
pub struct SpectraReport {
    pub graph: String,
    pub profile: SpectralProfile,
    pub min_multistep_t: u32,
    /// `(rule, alpha)` for the four standard rules.
    pub stepsizes: Vec<(AlphaRule, f64)>,
}

pub fn cmd_spectra(graph: &GraphSpec, t: u32) -> Result<SpectraReport> {
    let w = graph.build()?;
    let profile = w.spectral_profile(t)?;
    let stepsizes = [
        AlphaRule::OneOverL,
        AlphaRule::TwoOverMuPlusL,
        AlphaRule::TwoOverL,
        AlphaRule::Unit,
    ]
    .into_iter()
    .map(|r| (r, r.resolve(&profile)))
    .collect();
    Ok(SpectraReport {
        graph: graph.label(),
        min_multistep_t: min_multistep_t(&w)?,
        profile,
        stepsizes,
    })
}

impl fmt::Display for SpectraReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.profile;
        let rows: [(&str, String); 11] = [
            ("graph", self.graph.clone()),
            ("N", p.n.to_string()),
            ("t", p.t.to_string()),
            ("lambda_2", p.lambda2().to_string()),
            ("lambda_N", p.lambda_min().to_string()),
            ("mu_t", p.mu_t.to_string()),
            ("L_t", p.l_t.to_string()),
            ("sigma_2", p.sigma2.to_string()),
            ("sigma_2^t", p.sigma2_pow_t().to_string()),
            ("(L_t-mu_t)/(L_t+mu_t)", p.condition_rate().to_string()),
            ("min_multistep_t", self.min_multistep_t.to_string()),
        ];
        for (k, v) in rows {
            writeln!(f, "{k:<28}{v}")?;
        }
        for (rule, alpha) in &self.stepsizes {
            writeln!(f, "{:<28}{alpha}", format!("alpha[{rule}]"))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring30_table() {
        let rep = cmd_spectra(&GraphSpec::ring(30), 1).unwrap();
        assert!((rep.profile.l_t - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(rep.min_multistep_t, 164);
        let text = rep.to_string();
        assert!(text.contains("min_multistep_t             164"));
        assert_eq!(text.lines().count(), 15);
        let lazy = cmd_spectra(&GraphSpec::ring(30).lazy(true), 1).unwrap();
        assert!((lazy.profile.l_t - 2.0 / 3.0).abs() < 1e-12);
    }
}
