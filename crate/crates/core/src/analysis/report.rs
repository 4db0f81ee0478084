//! Line-oriented verification report.

use std::fmt;

use super::checks::Verdict;

/// Aggregate of one check over a sampling campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckTally {
    pub name: String,
    pub config_id: String,
    pub samples: usize,
    pub passes: usize,
    pub skips: usize,
    /// Smallest slack among evaluated samples; `+inf` when none were evaluated.
    pub min_slack: f64,
    /// Reasons of skipped samples, deduplicated.
    pub skip_reasons: Vec<String>,
}

impl CheckTally {
    pub fn new(name: impl Into<String>, config_id: impl Into<String>) -> Self {
        CheckTally {
            name: name.into(),
            config_id: config_id.into(),
            samples: 0,
            passes: 0,
            skips: 0,
            min_slack: f64::INFINITY,
            skip_reasons: Vec::new(),
        }
    }

    pub fn record(&mut self, verdict: &Verdict) {
        self.samples += 1;
        match verdict {
            Verdict::Checked(b) => {
                if b.holds() {
                    self.passes += 1;
                }
                self.min_slack = self.min_slack.min(b.slack());
            }
            Verdict::Skipped(reason) => {
                self.skips += 1;
                if !self.skip_reasons.contains(reason) {
                    self.skip_reasons.push(reason.clone());
                }
            }
        }
    }

    /// Records a boolean outcome with a known slack.
    pub fn record_pass(&mut self, pass: bool, slack: f64) {
        self.samples += 1;
        if pass {
            self.passes += 1;
        }
        self.min_slack = self.min_slack.min(slack);
    }

    pub fn merge(&mut self, other: &CheckTally) {
        self.samples += other.samples;
        self.passes += other.passes;
        self.skips += other.skips;
        self.min_slack = self.min_slack.min(other.min_slack);
        for r in &other.skip_reasons {
            if !self.skip_reasons.contains(r) {
                self.skip_reasons.push(r.clone());
            }
        }
    }

    pub fn failures(&self) -> usize {
        self.samples - self.passes - self.skips
    }

    pub fn ok(&self) -> bool {
        self.failures() == 0
    }

    /// `check_name,config_id,samples,passes,skips,min_slack`.
    pub fn line(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CheckTally {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{:e}",
            self.name, self.config_id, self.samples, self.passes, self.skips, self.min_slack
        )
    }
}
