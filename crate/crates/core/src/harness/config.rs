//! Flat `key=value` configuration files merged with command-line flags.
//!
//! Recognized keys: `graph` (`ring`, `complete` or `edges`), `N`, `lazy`,
//! `edges` (path of an edge list), `d`, `r`, `t`, `alpha`, `retraction`,
//! `mode`, `max_iters`, `stop`, `seed`, `out` and `name`. Flags override the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;

use crate::consensus::{AlphaRule, Mode, RunConfig, DEFAULT_MAX_ITERS, DEFAULT_STOP_TOL};
use crate::error::{Error, Result};
use crate::manifold::Retraction;
use crate::network::{parse_edge_list, GraphKind, GraphSpec};

const KEYS: &[&str] = &[
    "graph",
    "N",
    "lazy",
    "edges",
    "d",
    "r",
    "t",
    "alpha",
    "retraction",
    "mode",
    "max_iters",
    "stop",
    "seed",
    "out",
    "name",
];

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", lineno + 1),
                format!("expected key=value, got `{line}`"),
            ));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::config(k, "unknown key"));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

/// Communication graph flags shared by `run` and `spectra`.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct GraphArgs {
    /// ring, complete or edges
    #[arg(long)]
    pub graph: Option<String>,
    /// Number of agents
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Use the lazy matrix (W + I)/2
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub lazy: Option<bool>,
    /// Edge list file for --graph edges
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

impl GraphArgs {
    fn push_into(&self, map: &mut BTreeMap<String, String>) {
        set(map, "graph", &self.graph);
        set(map, "N", &self.n);
        set(map, "lazy", &self.lazy);
        set(map, "edges", &self.edges.as_ref().map(|p| p.display()));
    }

    pub fn to_spec(&self) -> Result<GraphSpec> {
        let mut map = BTreeMap::new();
        self.push_into(&mut map);
        graph_from_map(&map)
    }
}

fn set<T: Display>(map: &mut BTreeMap<String, String>, key: &str, value: &Option<T>) {
    if let Some(v) = value {
        map.insert(key.to_string(), v.to_string());
    }
}

fn graph_from_map(map: &BTreeMap<String, String>) -> Result<GraphSpec> {
    let get = |k: &str| map.get(k).map(String::as_str);
    let lazy = get("lazy")
        .map(|v| parse_value::<bool>("lazy", v))
        .transpose()?
        .unwrap_or(false);
    let n = get("N").map(|v| parse_value::<usize>("N", v)).transpose()?;
    let kind = get("graph").unwrap_or("ring");
    let spec = match kind {
        "ring" => GraphSpec::ring(n.unwrap_or(30)),
        "complete" => GraphSpec::complete(n.unwrap_or(30)),
        "edges" => {
            let path =
                get("edges").ok_or_else(|| Error::config("edges", "required with graph=edges"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::config("edges", format!("cannot read {path}: {e}")))?;
            let edges = parse_edge_list(&text)?;
            let inferred = edges.iter().map(|e| e.i.max(e.j) + 1).max().unwrap_or(0);
            GraphSpec {
                kind: GraphKind::Custom(edges),
                n: n.unwrap_or(inferred),
                lazy: false,
            }
        }
        other => {
            return Err(Error::config(
                "graph",
                format!("unknown graph `{other}` (expected ring, complete or edges)"),
            ))
        }
    };
    Ok(spec.lazy(lazy))
}

/// Flags of the `run` subcommand.
#[derive(Args, Clone, Debug, Default, PartialEq)]
pub struct RunArgs {
    /// key=value configuration file; flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Ambient dimension
    #[arg(long)]
    pub d: Option<usize>,
    /// Frame size
    #[arg(long)]
    pub r: Option<usize>,
    /// Communication rounds per iteration
    #[arg(long)]
    pub t: Option<u32>,
    /// one_over_L, two_over_mu_plus_L, two_over_L, unit or custom:<value>
    #[arg(long)]
    pub alpha: Option<String>,
    /// polar or qr
    #[arg(long)]
    pub retraction: Option<String>,
    /// matrix or message_passing
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Stop when (1/N)||x - x_bar||^2 falls to this value
    #[arg(long)]
    pub stop: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $STCON_OUT, else ./stcon-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stem of the output files
    #[arg(long)]
    pub name: Option<String>,
}

/// A fully resolved `run` invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub out: PathBuf,
    pub name: String,
}

impl RunArgs {
    /// Merges the file (if any) with the flags.
    pub fn settings(&self) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::config("config", format!("cannot read {}: {e}", path.display()))
            })?;
            map.extend(parse_key_values(&text)?);
        }
        self.graph.push_into(&mut map);
        set(&mut map, "d", &self.d);
        set(&mut map, "r", &self.r);
        set(&mut map, "t", &self.t);
        set(&mut map, "alpha", &self.alpha);
        set(&mut map, "retraction", &self.retraction);
        set(&mut map, "mode", &self.mode);
        set(&mut map, "max_iters", &self.max_iters);
        set(&mut map, "stop", &self.stop);
        set(&mut map, "seed", &self.seed);
        set(&mut map, "out", &self.out.as_ref().map(|p| p.display()));
        set(&mut map, "name", &self.name);
        Ok(map)
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        resolve_settings(&self.settings()?)
    }
}

pub fn resolve_settings(map: &BTreeMap<String, String>) -> Result<ResolvedRun> {
    fn opt<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        map.get(key)
            .map(|v| parse_value(key, v))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }
    let graph = graph_from_map(map)?;
    let mut config = RunConfig::new(graph, opt(map, "d", 5)?, opt(map, "r", 2)?);
    config.t = opt(map, "t", 1)?;
    config.alpha = match map.get("alpha") {
        Some(v) => v.parse::<AlphaRule>()?,
        None => AlphaRule::TwoOverMuPlusL,
    };
    config.retraction = match map.get("retraction") {
        Some(v) => v.parse::<Retraction>()?,
        None => Retraction::Polar,
    };
    config.mode = match map.get("mode") {
        Some(v) => v.parse::<Mode>()?,
        None => Mode::Matrix,
    };
    config.max_iters = opt(map, "max_iters", DEFAULT_MAX_ITERS)?;
    config.stop_tol = opt(map, "stop", DEFAULT_STOP_TOL)?;
    config.seed = opt(map, "seed", 0)?;
    config.validate()?;
    let out = super::output_dir(map.get("out").map(Path::new));
    let name = match map.get("name") {
        Some(n) if !n.is_empty() && !n.contains(['/', '\\']) => n.clone(),
        Some(n) => return Err(Error::config("name", format!("invalid file stem `{n}`"))),
        None => default_run_name(&config),
    };
    Ok(ResolvedRun { config, out, name })
}

/// `<graph>_t<t>_<alpha>_seed<seed>`, with `:` replaced for file-system safety.
pub fn default_run_name(config: &RunConfig) -> String {
    format!(
        "{}_t{}_{}_seed{}",
        config.graph.label(),
        config.t,
        config.alpha.to_string().replace(':', "-"),
        config.seed
    )
}
