//! The stepsize comparison grid: ring and lazy ring of 30 agents on
//! `St(5, 2)`, four stepsizes at `t = 1` plus `alpha = 1` at `t = 10`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use crate::consensus::{AlphaRule, RunConfig};
use crate::error::{Error, Result};
use crate::network::GraphSpec;

use super::run::{execute_run, write_summary, RunOutcome};

/// Runs sharing graph size, dimensions and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    /// `(run name, config)` pairs.
    pub runs: Vec<(String, RunConfig)>,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn fig1(seed: u64, out_dir: &Path) -> Self {
        let mut runs = Vec::new();
        for graph in [GraphSpec::ring(30), GraphSpec::ring(30).lazy(true)] {
            let grid = [
                (AlphaRule::OneOverL, 1),
                (AlphaRule::TwoOverMuPlusL, 1),
                (AlphaRule::TwoOverL, 1),
                (AlphaRule::Unit, 1),
                (AlphaRule::Unit, 10),
            ];
            for (alpha, t) in grid {
                let mut c = RunConfig::new(graph.clone(), 5, 2);
                c.alpha = alpha;
                c.t = t;
                c.seed = seed;
                runs.push((format!("fig1_{}_{}_t{}", graph.label(), alpha, t), c));
            }
        }
        ExperimentSpec {
            name: "fig1".into(),
            runs,
            out_dir: out_dir.to_path_buf(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Some((_, first)) = self.runs.first() else {
            return Err(Error::config("runs", "experiment has no runs"));
        };
        for (name, c) in &self.runs {
            c.validate()?;
            if (c.graph.n, c.d, c.r, c.seed) != (first.graph.n, first.d, first.r, first.seed) {
                return Err(Error::config(
                    "runs",
                    format!("run {name} differs from the first run in N, d, r or seed"),
                ));
            }
        }
        let mut names: Vec<&str> = self.runs.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("runs", "run names must be unique"));
        }
        Ok(())
    }

    /// Every run starts from the random state of the shared seed.
    pub fn init_label(&self) -> String {
        format!(
            "shared:seed={}",
            self.runs.first().map(|(_, c)| c.seed).unwrap_or(0)
        )
    }
}

#[derive(Clone, Debug)]
pub struct FigureBundle {
    pub runs: Vec<RunOutcome>,
    pub summary_path: PathBuf,
    pub plot_path: PathBuf,
}

impl FigureBundle {
    pub fn get(&self, name: &str) -> Option<&RunOutcome> {
        self.runs.iter().find(|r| r.name == name)
    }
}

/// Runs all configurations concurrently, then writes the summary and the plot script.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<FigureBundle> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir)?;
    let init = spec.init_label();
    let results: Vec<Result<RunOutcome>> = thread::scope(|s| {
        let handles: Vec<_> = spec
            .runs
            .iter()
            .map(|(name, c)| s.spawn(|| execute_run(name, c, &spec.out_dir, &init)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run thread panicked"))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary_path = spec.out_dir.join(format!("{}_summary.csv", spec.name));
    write_summary(
        &summary_path,
        &runs.iter().map(RunOutcome::summary_row).collect::<Vec<_>>(),
    )?;
    let plot_path = spec.out_dir.join(format!("{}.gp", spec.name));
    fs::write(&plot_path, plot_script(&spec.name, &runs))?;
    Ok(FigureBundle {
        runs,
        summary_path,
        plot_path,
    })
}

/// Gnuplot script: one row per graph, squared gradient norm on the left and
/// squared consensus distance on the right, both on a log scale. Run it from
/// the output directory.
pub fn plot_script(name: &str, runs: &[RunOutcome]) -> String {
    let mut graphs: Vec<String> = Vec::new();
    for r in runs {
        let label = r.config.graph.label();
        if !graphs.contains(&label) {
            graphs.push(label);
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot {name}.gp");
    let _ = writeln!(
        s,
        "set terminal pngcairo size 1400,{}",
        500 * graphs.len().max(1)
    );
    let _ = writeln!(s, "set output '{name}.png'");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set logscale y");
    let _ = writeln!(s, "set format y '10^{{%L}}'");
    let _ = writeln!(s, "set xlabel 'iteration'");
    let _ = writeln!(s, "set key top right");
    let _ = writeln!(s, "set multiplot layout {},2", graphs.len().max(1));
    for g in &graphs {
        for (col, what) in [(3, "||grad phi||^2"), (4, "(1/N)||x - x_bar||^2")] {
            let _ = writeln!(s, "set title '{g}: {what}'");
            let curves: Vec<String> = runs
                .iter()
                .filter(|r| &r.config.graph.label() == g)
                .map(|r| {
                    format!(
                        "'{}' every ::1 using 1:{col} with lines title 'alpha={} t={}'",
                        r.csv_path
                            .file_name()
                            .map(|f| f.to_string_lossy())
                            .unwrap_or_default(),
                        r.config.alpha,
                        r.config.t
                    )
                })
                .collect();
            let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
        }
    }
    let _ = writeln!(s, "unset multiplot");
    s
}

pub fn cmd_fig1(seed: u64, out_dir: &Path) -> Result<FigureBundle> {
    run_experiment(&ExperimentSpec::fig1(seed, out_dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape_and_validation() {
        let spec = ExperimentSpec::fig1(7, Path::new("unused"));
        assert_eq!(spec.runs.len(), 10);
        spec.validate().unwrap();
        assert_eq!(spec.init_label(), "shared:seed=7");
        let mut bad = spec.clone();
        bad.runs[3].1.seed = 8;
        assert!(bad.validate().is_err());
        let mut bad = spec.clone();
        bad.runs.clear();
        assert!(bad.validate().is_err());
        let mut bad = spec;
        bad.runs[1].0 = bad.runs[0].0.clone();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn small_experiment_bundle() {
        let dir = tempfile::tempdir().unwrap();
        let mut runs = Vec::new();
        for alpha in [AlphaRule::OneOverL, AlphaRule::Unit] {
            let mut c = RunConfig::new(GraphSpec::ring(6), 3, 1);
            c.alpha = alpha;
            c.seed = 2;
            runs.push((format!("small_{alpha}"), c));
        }
        let spec = ExperimentSpec {
            name: "small".into(),
            runs,
            out_dir: dir.path().to_path_buf(),
        };
        let b = run_experiment(&spec).unwrap();
        let summary = fs::read_to_string(&b.summary_path).unwrap();
        assert_eq!(summary.lines().count(), 3);
        for r in &b.runs {
            assert!(r.csv_path.exists());
            let csv = fs::read_to_string(&r.csv_path).unwrap();
            assert_eq!(csv.lines().count(), r.trace.iterations() + 2);
        }
        let plot = fs::read_to_string(&b.plot_path).unwrap();
        assert!(plot.contains("small_unit.csv"));
        assert!(plot.contains("set logscale y"));
    }
}
