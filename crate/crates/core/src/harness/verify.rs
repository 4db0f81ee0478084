//! Verification campaigns over the numerical checks.
//!
//! Each campaign draws its samples from per-index ChaCha streams of a seed
//! derived from the master seed and is split across worker threads; tallies
//! are merged after the join, so reports do not depend on the thread count.
//! Campaigns that walk trajectories count every audited step as a sample.

use std::fmt;
use std::str::FromStr;
use std::thread;

use rand::Rng;

use crate::analysis::checks::{check_tangent_second_order, l_membership};
use crate::analysis::rate::DEFAULT_WINDOW_FRACTION;
use crate::analysis::sampler::sample_rng;
use crate::analysis::{
    audit_step, check_descent, check_euclidean_rsi, check_grad_bounds, check_hemisphere,
    check_key_relation, check_mean_iam, check_polar_perturbation, check_retraction, check_rsi,
    check_tv_bound, descent_slope, estimate_rate, estimate_rate_series, fd_gradient_check, Bound,
    CheckTally, Region, RegionParams, RegionSampler, Setting, Snapshot, Verdict,
};
use crate::consensus::{drcs_step, run_drcs, run_euclidean_pgd, AlphaRule, Projection, RunConfig};
use crate::error::{Error, Result};
use crate::manifold::{
    gaussian_matrix, polar_retract, polar_retract_closed_form, random_stiefel_with, random_tangent,
    Mat, Retraction, StiefelPoint,
};
use crate::network::{min_multistep_t, ring_matrix, GraphSpec};
use crate::state::NetworkState;

/// Identity residuals must stay below this.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Relative tolerance of empirical rates against their targets.
pub const RATE_TOL: f64 = 0.05;
/// Slack allowed above `sigma_2` for Euclidean contraction factors.
pub const CONTRACTION_TOL: f64 = 1e-6;

const TRAJECTORY_STEPS: usize = 5;
const HEMISPHERE_SEEDS: usize = 50;
const HEMISPHERE_ITERS: usize = 1000;
const FD_STATES: usize = 20;
const FD_DIRECTIONS: usize = 5;
const FD_TOL: f64 = 1e-5;
const SLOPE_PAIRS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Manifold,
    Network,
    Consensus,
    Rsi,
    Rates,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Manifold,
        Suite::Network,
        Suite::Consensus,
        Suite::Rsi,
        Suite::Rates,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Manifold => "manifold",
            Suite::Network => "network",
            Suite::Consensus => "consensus",
            Suite::Rsi => "rsi",
            Suite::Rates => "rates",
        }
    }

    /// Comma-separated suite names, `all` or `none`.
    pub fn parse_list(spec: &str) -> Result<Vec<Suite>> {
        let mut out = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let add: Vec<Suite> = match part {
                "all" => Suite::ALL.to_vec(),
                "none" => Vec::new(),
                other => vec![other.parse()?],
            };
            for s in add {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "suite",
                    format!("unknown suite `{s}` (expected manifold, network, consensus, rsi, rates, all or none)"),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub suites: Vec<Suite>,
    pub seed: u64,
    /// Samples per sampling campaign.
    pub samples: usize,
    pub threads: usize,
}

impl VerifyOptions {
    pub fn new(suites: Vec<Suite>, seed: u64, samples: usize) -> Self {
        VerifyOptions {
            suites,
            seed,
            samples,
            threads: thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub tallies: Vec<CheckTally>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.tallies.iter().all(CheckTally::ok)
    }

    pub fn failures(&self) -> Vec<&CheckTally> {
        self.tallies.iter().filter(|t| !t.ok()).collect()
    }

    pub fn find(&self, name: &str, config_id: &str) -> Option<&CheckTally> {
        self.tallies
            .iter()
            .find(|t| t.name == name && t.config_id == config_id)
    }

    pub fn exit_code(&self) -> i32 {
        if self.ok() {
            super::exit::OK
        } else {
            super::exit::VERIFY_FAILED
        }
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tallies {
            writeln!(f, "{t}")?;
        }
        Ok(())
    }
}

pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    if opts.samples == 0 {
        return Err(Error::config("samples", "must be at least 1"));
    }
    let mut tallies = Vec::new();
    for suite in &opts.suites {
        tallies.extend(match suite {
            Suite::Manifold => suite_manifold(opts)?,
            Suite::Network => suite_network(opts)?,
            Suite::Consensus => suite_consensus(opts)?,
            Suite::Rsi => suite_rsi(opts)?,
            Suite::Rates => suite_rates(opts)?,
        });
    }
    Ok(VerifyReport { tallies })
}

type Checks = Vec<(&'static str, Verdict)>;

#[derive(Default)]
struct Tallies(Vec<CheckTally>);

impl Tallies {
    fn slot(&mut self, config_id: &str, name: &str) -> &mut CheckTally {
        let pos = match self.0.iter().position(|t| t.name == name) {
            Some(p) => p,
            None => {
                self.0.push(CheckTally::new(name, config_id));
                self.0.len() - 1
            }
        };
        &mut self.0[pos]
    }

    fn merge(&mut self, other: Tallies) {
        for t in other.0 {
            let config_id = t.config_id.clone();
            self.slot(&config_id, &t.name).merge(&t);
        }
    }
}

/// Runs `f` on sample indices `0..samples` across worker threads.
fn campaign<F>(config_id: &str, samples: usize, threads: usize, f: F) -> Result<Vec<CheckTally>>
where
    F: Fn(u64) -> Result<Checks> + Sync,
{
    let threads = threads.clamp(1, samples.max(1));
    let parts: Vec<Result<Tallies>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|k| {
                let f = &f;
                s.spawn(move || {
                    let mut t = Tallies::default();
                    for i in (k..samples).step_by(threads) {
                        for (name, v) in f(i as u64)? {
                            t.slot(config_id, name).record(&v);
                        }
                    }
                    Ok(t)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verification worker panicked"))
            .collect()
    });
    let mut all = Tallies::default();
    for p in parts {
        all.merge(p?);
    }
    Ok(all.0)
}

/// Seed of one campaign, derived from the master seed.
fn sub_seed(master: u64, salt: u64) -> u64 {
    sample_rng(master, salt).random()
}

fn bounded(v: f64, cap: f64) -> Verdict {
    Bound::at_most(v, cap).into()
}

fn agreement(ok: bool) -> Verdict {
    Bound::at_least(if ok { 1.0 } else { 0.0 }, 1.0).into()
}

fn suite_manifold(o: &VerifyOptions) -> Result<Vec<CheckTally>> {
    let mut out = Vec::new();
    for (salt, (d, r)) in [(5usize, 2usize), (3, 1)].into_iter().enumerate() {
        let master = sub_seed(o.seed, 100 + salt as u64);
        out.extend(campaign(
            &format!("St{d}x{r}"),
            o.samples,
            o.threads,
            |i| {
                let mut rng = sample_rng(master, i);
                let x = random_stiefel_with(&mut rng, d, r)?;
                let y = random_stiefel_with(&mut rng, d, r)?;
                let v = random_tangent(&mut rng, &x);
                let len: f64 = rng.random();
                let xi = v.scaled(len / v.norm());
                let polar = check_retraction(&xi, &y, Retraction::Polar)?;
                let qr = check_retraction(&xi.scaled(0.5), &y, Retraction::Qr)?;
                let closed = polar_retract_closed_form(&x, &xi)?;
                let svd = polar_retract(&x, &xi)?;
                Ok(vec![
                    ("polar_second_order", polar.second_order),
                    ("polar_nonexpansive", polar.nonexpansive),
                    ("qr_second_order", qr.second_order),
                    (
                        "tangent_second_order",
                        check_tangent_second_order(&x, &y)?.into(),
                    ),
                    (
                        "polar_closed_form",
                        bounded((closed.as_matrix() - svd.as_matrix()).norm(), 1e-12),
                    ),
                ])
            },
        )?);
    }

    let w = ring_matrix(8)?;
    let setting = Setting::new(&w, 1)?;
    let master = sub_seed(o.seed, 110);
    let sampler = RegionSampler::calibrate(
        &setting,
        5,
        2,
        RegionParams::maximal(8, 2),
        Region::MeanPrecondition,
        master,
    )?;
    let mean_checks = |x: &NetworkState| -> Result<Checks> {
        let rep = check_mean_iam(x)?;
        Ok(rep
            .verdicts()
            .into_iter()
            .map(|(n, v)| (n, v.clone()))
            .collect())
    };
    out.extend(campaign(
        "ring8_St5x2_mean_pre",
        o.samples,
        o.threads,
        |i| mean_checks(&sampler.draw(i)?),
    )?);
    out.extend(campaign(
        "ring8_St5x2_anywhere",
        o.samples,
        o.threads,
        |i| {
            mean_checks(&NetworkState::random_with(
                &mut sample_rng(master, i),
                8,
                5,
                2,
            )?)
        },
    )?);
    Ok(out)
}

fn suite_network(o: &VerifyOptions) -> Result<Vec<CheckTally>> {
    let mut out = Vec::new();
    for (salt, graph) in [
        GraphSpec::ring(10),
        GraphSpec::ring(10).lazy(true),
        GraphSpec::ring(30),
        GraphSpec::ring(30).lazy(true),
    ]
    .into_iter()
    .enumerate()
    {
        let w = graph.build()?;
        let id = graph.label();
        let min_t = min_multistep_t(&w)?;
        let mut spectrum = CheckTally::new("power_spectrum", id.clone());
        for t in [1, 3, 10, min_t] {
            let wt = w.power(t)?;
            let mut powered: Vec<f64> = w.eigenvalues().iter().map(|l| l.powi(t as i32)).collect();
            powered.sort_by(|a, b| b.total_cmp(a));
            let diff = wt
                .eigenvalues()
                .iter()
                .zip(&powered)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            spectrum.record(&bounded(diff, 1e-12));
        }
        out.push(spectrum);
        let master = sub_seed(o.seed, 200 + salt as u64);
        out.extend(campaign(&id, o.samples, o.threads, |i| {
            let mut rng = sample_rng(master, i);
            let blocks: Vec<Mat> = (0..w.n())
                .map(|_| gaussian_matrix(&mut rng, 5, 2))
                .collect();
            let rep = check_euclidean_rsi(&blocks, &w)?;
            Ok(vec![
                ("euclid_rsi", rep.rsi.into()),
                ("euclid_grad_lower", rep.lower.into()),
                ("euclid_grad_upper", rep.upper.into()),
            ])
        })?);
    }

    let w = ring_matrix(30)?;
    let min_t = min_multistep_t(&w)?;
    let params = RegionParams::maximal(30, 2);
    for t in [1, min_t] {
        let setting = Setting::new(&w, t)?;
        let master = sub_seed(o.seed, 210 + t as u64);
        let sampler = RegionSampler::calibrate(&setting, 5, 2, params, Region::N2, master)?;
        out.extend(campaign(
            &format!("ring30_t{t}_N2"),
            o.samples,
            o.threads,
            |i| {
                let x = sampler.draw(i)?;
                let rep = check_tv_bound(&Snapshot::new(&setting, &x)?, &setting, &params);
                let intermediate = if t >= min_t {
                    bounded(rep.intermediate, params.delta2 / 2.0)
                } else {
                    Verdict::skipped(format!("t = {t} below min_multistep_t = {min_t}"))
                };
                Ok(vec![
                    ("tv_bound", rep.bound),
                    ("tv_chain", bounded(rep.lhs, rep.intermediate)),
                    ("tv_intermediate", intermediate),
                ])
            },
        )?);
    }
    Ok(out)
}

fn suite_consensus(o: &VerifyOptions) -> Result<Vec<CheckTally>> {
    let mut out = Vec::new();
    let (n, d, r) = (30, 5, 2);
    let w = ring_matrix(n)?;
    let params = RegionParams::maximal(n, r);
    for t in [1u32, 10] {
        let setting = Setting::new(&w, t)?;
        let id = format!("ring{n}_t{t}");
        let master = sub_seed(o.seed, 300 + t as u64);
        out.extend(campaign(&id, o.samples, o.threads, |i| {
            let mut rng = sample_rng(master, i);
            let x = NetworkState::random_with(&mut rng, n, d, r)?;
            let y = NetworkState::random_with(&mut rng, n, d, r)?;
            let kr = check_key_relation(&x, &y, &setting)?;
            let far = check_descent(&x, &y, &setting)?;
            let s = log_uniform(&mut rng, 1e-3, 1.0);
            let near = check_descent(&x, &perturb(&mut rng, &x, s)?, &setting)?;
            let mut checks: Checks = vec![
                ("key_relation_residual", bounded(kr.residual, IDENTITY_TOL)),
                ("key_relation_inequality", kr.inequality.into()),
                (
                    "key_correction_nonneg",
                    Bound::at_least(kr.correction, 0.0).into(),
                ),
                ("descent", far.bound.into()),
                ("descent_near", near.bound.into()),
            ];
            match Snapshot::new(&setting, &x) {
                Ok(snap) => checks.extend(
                    check_grad_bounds(&snap, &setting, &params)
                        .verdicts()
                        .into_iter()
                        .map(|(k, v)| (k, v.clone())),
                ),
                Err(Error::DegenerateMean { .. }) => {
                    for k in ["grad_sum", "grad_norm", "grad_block"] {
                        checks.push((k, Verdict::skipped("IAM undefined")));
                    }
                }
                Err(e) => return Err(e),
            }
            Ok(checks)
        })?);

        let mut rng = sample_rng(master, u64::MAX);
        let mut reports = Vec::with_capacity(SLOPE_PAIRS);
        for _ in 0..SLOPE_PAIRS {
            let x = NetworkState::random_with(&mut rng, n, d, r)?;
            let s = log_uniform(&mut rng, 1e-3, 1.0);
            reports.push(check_descent(&x, &perturb(&mut rng, &x, s)?, &setting)?);
        }
        let mut slope = CheckTally::new("descent_slope", id.clone());
        slope.record(&bounded(descent_slope(&reports), setting.l_t() / 2.0));
        out.push(slope);

        let mut fd = CheckTally::new("fd_gradient", id.clone());
        for k in 0..FD_STATES {
            let x = NetworkState::random_with(
                &mut sample_rng(master, u64::MAX - 1 - k as u64),
                n,
                d,
                r,
            )?;
            let rep = fd_gradient_check(&x, &w, t, FD_DIRECTIONS, 1e-6, master ^ k as u64)?;
            fd.record(&bounded(rep.max_rel_error, FD_TOL));
        }
        out.push(fd);

        let master_n2 = sub_seed(o.seed, 310 + t as u64);
        let sampler = RegionSampler::calibrate(&setting, d, r, params, Region::N2, master_n2)?;
        out.extend(campaign(&format!("{id}_N2"), o.samples, o.threads, |i| {
            let x = sampler.draw(i)?;
            let snap = Snapshot::new(&setting, &x)?;
            Ok(check_grad_bounds(&snap, &setting, &params)
                .verdicts()
                .into_iter()
                .map(|(k, v)| (k, v.clone()))
                .collect())
        })?);
    }

    // Trajectories started in N_R: descent, sufficient decrease, monotone and
    // contracting distance, region preservation and IAM drift per step.
    let min_t = min_multistep_t(&w)?;
    for t in [1, min_t] {
        let setting = Setting::new(&w, t)?;
        let master = sub_seed(o.seed, 320 + t as u64);
        let sampler = RegionSampler::calibrate(&setting, d, r, params, Region::NR, master)?;
        // 1/L_t is numerically 1 at large t; 1/(2 L_t) meets the beta = 1/2
        // sufficient-decrease threshold near consensus.
        let half = ("half_over_L", AlphaRule::Custom(0.5 / setting.l_t()));
        let rules = if t == 1 {
            vec![
                ("one_over_L", AlphaRule::OneOverL),
                ("unit", AlphaRule::Unit),
                half,
            ]
        } else {
            vec![("unit", AlphaRule::Unit), half]
        };
        for (label, rule) in rules {
            let alpha = rule.resolve(&setting.profile);
            out.extend(campaign(
                &format!("ring{n}_t{t}_NR_{label}"),
                o.samples,
                o.threads,
                |i| {
                    let mut x = sampler.draw(i)?;
                    let mut checks = Checks::new();
                    for _ in 0..TRAJECTORY_STEPS {
                        let next = drcs_step(&x, &w, t, alpha, Retraction::Polar)?;
                        let audit =
                            audit_step(&x, &next, &setting, alpha, Retraction::Polar, &params)?;
                        checks.extend(audit.verdicts());
                        checks.push((
                            "polar_perturbation_step",
                            check_polar_perturbation(&x, &next, &params)?,
                        ));
                        x = next;
                    }
                    Ok(checks)
                },
            )?);
        }
        let master_pairs = sub_seed(o.seed, 330 + t as u64);
        let n1 = RegionSampler::calibrate(&setting, d, r, params, Region::N1, master_pairs)?;
        out.extend(campaign(
            &format!("ring{n}_t{t}_N1_pairs"),
            o.samples,
            o.threads,
            |i| {
                let x = n1.draw(i)?;
                let mut rng = sample_rng(master_pairs, i ^ (1 << 63));
                let s = 0.2 * n1.scale() * rng.random::<f64>();
                let y = perturb(&mut rng, &x, s)?;
                Ok(vec![(
                    "polar_perturbation",
                    check_polar_perturbation(&x, &y, &params)?,
                )])
            },
        )?);
    }

    // Hemisphere invariance on the sphere.
    for t in [1u32, 3] {
        let w10 = ring_matrix(10)?;
        let setting = Setting::new(&w10, t)?;
        let master = sub_seed(o.seed, 340 + t as u64);
        out.extend(campaign(
            &format!("ring10_St3x1_t{t}_hemisphere"),
            HEMISPHERE_SEEDS,
            o.threads,
            |i| {
                let mut rng = sample_rng(master, i);
                let y = random_stiefel_with(&mut rng, 3, 1)?;
                let blocks = (0..10)
                    .map(|_| {
                        let b = random_stiefel_with(&mut rng, 3, 1)?;
                        if (b.as_matrix().transpose() * y.as_matrix())[(0, 0)] < 0.0 {
                            StiefelPoint::new(-b.into_matrix())
                        } else {
                            Ok(b)
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let x0 = NetworkState::new(blocks)?;
                let alpha = rng.random_range(0.1..=1.0);
                Ok(vec![(
                    "hemisphere",
                    check_hemisphere(&setting, &x0, &y, alpha, HEMISPHERE_ITERS)?,
                )])
            },
        )?);
    }
    Ok(out)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Retracts tangent noise of norm `scale` at every block of `x`.
fn perturb<R: Rng + ?Sized>(rng: &mut R, x: &NetworkState, scale: f64) -> Result<NetworkState> {
    let blocks = x
        .blocks()
        .iter()
        .map(|b| {
            let v = random_tangent(rng, b);
            Retraction::Polar.apply(&v.scaled(scale / v.norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    NetworkState::new(blocks)
}

fn suite_rsi(o: &VerifyOptions) -> Result<Vec<CheckTally>> {
    let mut out = Vec::new();
    let (d, r, nu) = (5, 2, 0.5);
    for n in [8usize, 30] {
        let w = ring_matrix(n)?;
        let params = RegionParams::maximal(n, r);
        for t in [1, min_multistep_t(&w)?] {
            let setting = Setting::new(&w, t)?;
            for (salt, region) in [Region::NR, Region::Nl].into_iter().enumerate() {
                let master = sub_seed(o.seed, 400 + 10 * n as u64 + 1000 * t as u64 + salt as u64);
                let sampler = RegionSampler::calibrate(&setting, d, r, params, region, master)?;
                let mu_t = setting.mu_t();
                out.extend(campaign(
                    &format!("ring{n}_t{t}_{region}"),
                    o.samples,
                    o.threads,
                    |i| {
                        let x = sampler.draw(i)?;
                        let snap = Snapshot::new(&setting, &x)?;
                        let rep = check_rsi(&snap, &setting, &params, nu);
                        let mut checks: Checks = rep
                            .verdicts()
                            .into_iter()
                            .map(|(k, v)| (k, v.clone()))
                            .collect();
                        let in_region = |flag: bool, what: &str, v: Verdict| {
                            if flag {
                                v
                            } else {
                                Verdict::skipped(format!("state outside {what}"))
                            }
                        };
                        let (by_dist, by_inner) = l_membership(&snap);
                        checks.extend([
                            (
                                "rsi_decomposition",
                                bounded(rep.decomposition_residual, IDENTITY_TOL),
                            ),
                            ("pq_nonneg", Bound::at_least(rep.pq_sum, 0.0).into()),
                            (
                                "Phi_R_above_one",
                                in_region(
                                    rep.regions.nr,
                                    "N_R",
                                    Bound::at_least(rep.big_phi_r, 1.0).into(),
                                ),
                            ),
                            (
                                "Phi_l_above_one",
                                in_region(
                                    rep.regions.nl,
                                    "N_l",
                                    Bound::at_least(rep.big_phi_l, 1.0).into(),
                                ),
                            ),
                            (
                                "gamma_R_above_half_mu",
                                in_region(
                                    rep.regions.nr,
                                    "N_R",
                                    Bound::at_least(rep.gamma_r, mu_t / 2.0).into(),
                                ),
                            ),
                            (
                                "gamma_l_above_half_mu",
                                in_region(
                                    rep.regions.nl,
                                    "N_l",
                                    Bound::at_least(rep.gamma_l, mu_t / 2.0).into(),
                                ),
                            ),
                            ("L_formulations_agree", agreement(by_dist == by_inner)),
                        ]);
                        Ok(checks)
                    },
                )?);
            }
        }
    }
    Ok(out)
}

fn suite_rates(o: &VerifyOptions) -> Result<Vec<CheckTally>> {
    let mut out = Vec::new();
    let id = "ring30_St5x2";
    let run = |alpha: AlphaRule, t: u32| -> Result<_> {
        let mut c = RunConfig::new(GraphSpec::ring(30), 5, 2);
        c.alpha = alpha;
        c.t = t;
        c.seed = o.seed;
        let (trace, _) = run_drcs(&c)?;
        let profile = c.resolve()?.1;
        Ok((trace, profile))
    };
    let (unit, p1) = run(AlphaRule::Unit, 1)?;
    let (opt, _) = run(AlphaRule::TwoOverMuPlusL, 1)?;
    let (multi, _) = run(AlphaRule::Unit, 10)?;
    let mut tally = |name: &str, v: Verdict| {
        let mut t = CheckTally::new(name, id);
        t.record(&v);
        out.push(t);
    };
    let rel = |trace, target: f64| -> Result<f64> {
        Ok(estimate_rate(trace, DEFAULT_WINDOW_FRACTION, None)?.relative_error(target))
    };
    tally(
        "rate_unit_vs_sigma2",
        bounded(rel(&unit, p1.sigma2_pow_t())?, RATE_TOL),
    );
    tally(
        "rate_optimal_vs_condition",
        bounded(rel(&opt, p1.condition_rate())?, RATE_TOL),
    );
    let converged = |tr: &crate::consensus::ConvergenceTrace| {
        tr.status() == crate::consensus::TerminalStatus::Converged
    };
    if converged(&unit) && converged(&multi) {
        let ratio = multi.iterations() as f64 / unit.iterations() as f64;
        tally(
            "multistep_speedup_lower",
            Bound::at_least(ratio, 1.0 / 20.0).into(),
        );
        tally("multistep_speedup_upper", bounded(ratio, 1.0 / 5.0));
    } else {
        tally("multistep_speedup_lower", agreement(false));
        tally("multistep_speedup_upper", agreement(false));
    }

    // Euclidean baseline on ring(10).
    let w = ring_matrix(10)?;
    let p = w.spectral_profile(1)?;
    let mut rng = sample_rng(sub_seed(o.seed, 500), 0);
    let x0: Vec<Mat> = (0..10).map(|_| gaussian_matrix(&mut rng, 5, 2)).collect();
    let pgd = run_euclidean_pgd(x0.clone(), &w, 1.0, Projection::Identity, 150)?;
    let mut contraction = CheckTally::new("pgd_contraction", "ring10");
    for c in pgd.contractions() {
        contraction.record(&bounded(c, p.sigma2 + CONTRACTION_TOL));
    }
    out.push(contraction);
    let est = estimate_rate_series(&pgd.consensus_series(), DEFAULT_WINDOW_FRACTION)?;
    let mut t = CheckTally::new("pgd_rate_unit", "ring10");
    t.record(&bounded(est.per_step_ratio, p.sigma2 + CONTRACTION_TOL));
    out.push(t);
    let pgd = run_euclidean_pgd(x0, &w, 2.0 / (p.mu + p.l), Projection::Identity, 150)?;
    let est = estimate_rate_series(&pgd.consensus_series(), DEFAULT_WINDOW_FRACTION)?;
    let mut t = CheckTally::new("pgd_rate_optimal", "ring10");
    t.record(&bounded(est.relative_error(p.condition_rate()), RATE_TOL));
    out.push(t);
    Ok(out)
}
