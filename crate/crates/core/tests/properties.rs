use std::collections::BTreeSet;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stcon::analysis::checks::l_membership;
use stcon::analysis::{
    estimate_rate_series, h_value, phi_value, Region, RegionParams, RegionSampler, Setting,
    Snapshot,
};
use stcon::consensus::{
    drcs_gradient, drcs_step, multistep_grad, run_drcs, run_euclidean_pgd, AlphaRule, NodeNetwork,
    Projection, RunConfig,
};
use stcon::manifold::{
    gaussian_matrix, iam, orthonormality_residual, project_normal, project_stiefel,
    project_tangent, random_stiefel_with, random_tangent,
};
use stcon::network::{from_edges, ring_matrix, Edge, GraphSpec};
use stcon::{Mat, MixingMatrix, NetworkState, Retraction, StiefelPoint};

const REL: f64 = 1e-12;

fn le(lhs: f64, rhs: f64) -> bool {
    lhs - rhs <= REL * (1.0 + lhs.abs() + rhs.abs())
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `W^t` by plain repeated multiplication.
fn naive_power(w: &MixingMatrix, t: u32) -> DMatrix<f64> {
    let mut p = DMatrix::identity(w.n(), w.n());
    for _ in 0..t {
        p = &p * w.entries();
    }
    p
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|a, b| b.total_cmp(a));
    e
}

fn sigma2_of(m: &DMatrix<f64>) -> f64 {
    let e = sorted_eigenvalues(m);
    e[1].abs().max(e[e.len() - 1].abs())
}

/// Metropolis matrix of a random connected graph: a shuffled spanning path plus extra edges.
fn random_graph() -> impl Strategy<Value = MixingMatrix> {
    (
        3usize..=10,
        any::<u64>(),
        prop::collection::vec((0usize..10, 0usize..10), 0..12),
    )
        .prop_map(|(n, seed, extra)| {
            let mut order: Vec<usize> = (0..n).collect();
            let mut r = rng(seed);
            for i in (1..n).rev() {
                order.swap(i, r.random_range(0..=i));
            }
            let mut pairs = BTreeSet::new();
            for w in order.windows(2) {
                pairs.insert((w[0].min(w[1]), w[0].max(w[1])));
            }
            for (a, b) in extra {
                let (a, b) = (a % n, b % n);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            let edges: Vec<Edge> = pairs
                .into_iter()
                .map(|(i, j)| Edge { i, j, weight: None })
                .collect();
            from_edges(n, &edges).expect("connected Metropolis matrix")
        })
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=4).prop_flat_map(|r| (r.max(2)..=r + 3, Just(r)))
}

/// Blocks retracted from a common base point along tangent noise of norm `scale`.
fn near_consensus(seed: u64, n: usize, d: usize, r: usize, scale: f64) -> NetworkState {
    let mut g = rng(seed);
    let base = random_stiefel_with(&mut g, d, r).unwrap();
    let blocks = (0..n)
        .map(|_| {
            let v = random_tangent(&mut g, &base);
            Retraction::Polar
                .apply(&v.scaled(scale / v.norm()))
                .unwrap()
        })
        .collect();
    NetworkState::new(blocks).unwrap()
}

fn dense_euclidean_grad(x: &NetworkState, wt: &DMatrix<f64>) -> Vec<Mat> {
    let xs: Vec<&Mat> = x.matrices().collect();
    (0..xs.len())
        .map(|i| {
            let mut g = xs[i].clone();
            for j in 0..xs.len() {
                g -= xs[j] * wt[(i, j)];
            }
            g
        })
        .collect()
}

fn tangent_part(x: &Mat, v: &Mat) -> Mat {
    let s = x.transpose() * v + v.transpose() * x;
    v - x * s * 0.5
}

fn phi_dense(x: &NetworkState, wt: &DMatrix<f64>) -> f64 {
    let xs: Vec<&Mat> = x.matrices().collect();
    let mut total = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            total += wt[(i, j)] * (xs[i] - xs[j]).norm_squared();
        }
    }
    total / 4.0
}

fn dev(x: &NetworkState, y: &StiefelPoint) -> f64 {
    x.matrices()
        .map(|b| (b - y.as_matrix()).norm_squared())
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tangent_and_normal_parts_sum_to_input((d, r) in dims(), seed in any::<u64>(), scale in 1e-3f64..1e3) {
        let mut g = rng(seed);
        let x = random_stiefel_with(&mut g, d, r).unwrap();
        let v = gaussian_matrix(&mut g, d, r) * scale;
        let t = project_tangent(&x, &v).unwrap();
        let nrm = project_normal(&x, &v).unwrap();
        prop_assert!((t.as_matrix() + &nrm - &v).amax() <= 1e-13 * scale.max(1.0) * 10.0);
        let again = project_tangent(&x, t.as_matrix()).unwrap();
        prop_assert!((again.as_matrix() - t.as_matrix()).amax() <= 1e-12 * scale.max(1.0));
        prop_assert!((t.as_matrix() - tangent_part(x.as_matrix(), &v)).amax() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn tangent_projection_of_a_secant_is_second_order((d, r) in dims(), seed in any::<u64>()) {
        let mut g = rng(seed);
        let x = random_stiefel_with(&mut g, d, r).unwrap();
        let y = random_stiefel_with(&mut g, d, r).unwrap();
        let diff = x.as_matrix() - y.as_matrix();
        let p = project_tangent(&x, &diff).unwrap();
        prop_assert!(le((p.as_matrix() - &diff).norm(), 0.5 * diff.norm_squared()));
    }

    #[test]
    fn polar_retraction_is_nonexpansive((d, r) in dims(), seed in any::<u64>(), scale in 1e-4f64..10.0) {
        let mut g = rng(seed);
        let x = random_stiefel_with(&mut g, d, r).unwrap();
        let y = random_stiefel_with(&mut g, d, r).unwrap();
        let v = random_tangent(&mut g, &x);
        let xi = v.scaled(scale / v.norm());
        let out = Retraction::Polar.apply(&xi).unwrap();
        prop_assert!(orthonormality_residual(out.as_matrix()) <= 1e-12);
        let moved = x.as_matrix() + xi.as_matrix();
        prop_assert!(le((out.as_matrix() - y.as_matrix()).norm(), (moved - y.as_matrix()).norm()));
    }

    #[test]
    fn mean_and_iam_chain(n in 2usize..12, (d, r) in dims(), seed in any::<u64>(), scale in 1e-3f64..1.5) {
        let x = near_consensus(seed, n, d, r, scale);
        let xbar = iam(&x).unwrap();
        let xhat = x.euclidean_mean();
        let projected = project_stiefel(&xhat).unwrap();
        prop_assert_eq!(xbar.as_matrix(), projected.as_matrix());
        let dist = dev(&x, &xbar);
        prop_assume!(dist <= n as f64 / 2.0);
        let euclid: f64 = x.matrices().map(|b| (b - &xhat).norm_squared()).sum();
        let (nf, rf) = (n as f64, r as f64);
        prop_assert!(le(0.5 * dist, euclid));
        prop_assert!(le(euclid, dist));
        prop_assert!(le((xbar.as_matrix() - &xhat).norm(), 2.0 * rf.sqrt() * dist / nf));
        prop_assert!(le(dist - 4.0 * rf * dist * dist / nf, euclid));
    }

    #[test]
    fn powers_keep_spectral_structure(w in random_graph(), t in 1u32..=50) {
        let wt = w.power(t).unwrap();
        let naive = naive_power(&w, t);
        prop_assert!((wt.entries() - &naive).amax() <= 1e-12);
        let s1 = sigma2_of(w.entries());
        prop_assert!((sigma2_of(wt.entries()) - s1.powi(t as i32)).abs() <= 1e-10);
        let n = w.n();
        let tv = (0..n)
            .map(|i| (0..n).map(|j| (naive[(i, j)] - 1.0 / n as f64).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        prop_assert!(le(tv, (n as f64).sqrt() * s1.powi(t as i32)));
    }

    #[test]
    fn lazy_spectrum_and_condition_rate(w in random_graph()) {
        let lazy = w.lazy();
        prop_assert!(sorted_eigenvalues(lazy.entries()).iter().all(|&l| l >= -1e-12));
        let e = sorted_eigenvalues(w.entries());
        let (mu, l) = (1.0 - e[1], 1.0 - e[e.len() - 1]);
        prop_assert!(le((l - mu) / (l + mu), sigma2_of(w.entries())));
        let p = w.spectral_profile(1).unwrap();
        prop_assert!((p.mu_t - mu).abs() <= 1e-12 && (p.l_t - l).abs() <= 1e-12);
    }

    #[test]
    fn multistep_gradient_matches_dense_power(w in random_graph(), t in 1u32..=12, (d, r) in dims(), seed in any::<u64>()) {
        let x = NetworkState::random(w.n(), d, r, seed).unwrap();
        let g = multistep_grad(&x, &w, t).unwrap();
        for (a, b) in g.blocks().iter().zip(dense_euclidean_grad(&x, &naive_power(&w, t))) {
            prop_assert!((a - b).amax() <= 1e-11);
        }
    }

    #[test]
    fn potential_identities(w in random_graph(), t in 1u32..=6, (d, r) in dims(), seed in any::<u64>()) {
        let x = NetworkState::random(w.n(), d, r, seed).unwrap();
        let wt = naive_power(&w, t);
        let phi = phi_value(&x, &w, t).unwrap();
        prop_assert!((phi - phi_dense(&x, &wt)).abs() <= 1e-10);
        let nr = (w.n() * r) as f64;
        prop_assert!((phi + h_value(&x, &w, t).unwrap() - nr / 2.0).abs() <= 1e-10);
    }

    #[test]
    fn riemannian_and_euclidean_secant_relation(w in random_graph(), t in 1u32..=6, (d, r) in dims(), seed in any::<u64>()) {
        let n = w.n();
        let x = NetworkState::random(n, d, r, seed).unwrap();
        let y = NetworkState::random(n, d, r, seed ^ 0x5eed).unwrap();
        let wt = naive_power(&w, t);
        let xs: Vec<&Mat> = x.matrices().collect();
        let egrad = dense_euclidean_grad(&x, &wt);
        let mut riemannian = 0.0;
        let mut euclidean = 0.0;
        let mut correction = 0.0;
        for (i, yi) in y.matrices().enumerate() {
            let step = yi - xs[i];
            riemannian += frob_inner(&tangent_part(xs[i], &egrad[i]), &step);
            euclidean += frob_inner(&egrad[i], &step);
            let mut q = Mat::zeros(r, r);
            for j in 0..n {
                let diff = xs[i] - xs[j];
                q += diff.transpose() * &diff * wt[(i, j)];
            }
            correction += 0.25 * frob_inner(&q, &(step.transpose() * &step));
        }
        prop_assert!((riemannian - euclidean - correction).abs() <= 1e-10);
        prop_assert!(le(euclidean, riemannian));
        let lib = drcs_gradient(&x, &w, t).unwrap();
        for (a, b) in lib.blocks().iter().zip(xs.iter().zip(&egrad).map(|(xi, g)| tangent_part(xi, g))) {
            prop_assert!((a - b).amax() <= 1e-11);
        }
    }

    #[test]
    fn secant_decomposition(w in random_graph(), t in 1u32..=6, (d, r) in dims(), seed in any::<u64>(), scale in 1e-2f64..1.0) {
        let n = w.n();
        let x = near_consensus(seed, n, d, r, scale);
        let Ok(xbar) = iam(&x) else { return Ok(()); };
        let wt = naive_power(&w, t);
        let xs: Vec<&Mat> = x.matrices().collect();
        let egrad = dense_euclidean_grad(&x, &wt);
        let mut lhs = 0.0;
        let mut pq = 0.0;
        for i in 0..n {
            let off = xs[i] - xbar.as_matrix();
            lhs += frob_inner(&off, &tangent_part(xs[i], &egrad[i]));
            let p = off.transpose() * &off * 0.5;
            let mut q = Mat::zeros(r, r);
            for j in 0..n {
                let diff = xs[i] - xs[j];
                q += diff.transpose() * &diff * (0.5 * wt[(i, j)]);
            }
            pq += frob_inner(&p, &q);
        }
        prop_assert!(pq >= -1e-12);
        prop_assert!((lhs - (2.0 * phi_dense(&x, &wt) - pq)).abs() <= 1e-10);
    }

    #[test]
    fn critical_region_formulations_agree(n in 2usize..10, (d, r) in dims(), seed in any::<u64>(), scale in 1e-2f64..3.0) {
        let w = if n == 2 { from_edges(2, &[Edge { i: 0, j: 1, weight: None }]).unwrap() } else { ring_matrix(n).unwrap() };
        let setting = Setting::new(&w, 1).unwrap();
        let x = near_consensus(seed, n, d, r, scale);
        if let Ok(snap) = Snapshot::new(&setting, &x) {
            let (by_distance, by_inner) = l_membership(&snap);
            prop_assert_eq!(by_distance, by_inner);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn iterates_stay_feasible_and_descend(w in random_graph(), t in 1u32..=4, (d, r) in dims(), seed in any::<u64>(), alpha in 0.05f64..2.0) {
        let wt = naive_power(&w, t);
        let e = sorted_eigenvalues(&wt);
        let l_t = 1.0 - e[e.len() - 1];
        let mut x = NetworkState::random(w.n(), d, r, seed).unwrap();
        for _ in 0..20 {
            let next = drcs_step(&x, &w, t, alpha, Retraction::Polar).unwrap();
            prop_assert!(next.matrices().all(|b| orthonormality_residual(b) <= 1e-12));
            let grad = drcs_gradient(&x, &w, t).unwrap();
            let steps: Vec<Mat> = next.matrices().zip(x.matrices()).map(|(b, a)| b - a).collect();
            let lin: f64 = grad.blocks().iter().zip(&steps).map(|(g, s)| frob_inner(g, s)).sum();
            let sq: f64 = steps.iter().map(|s| s.norm_squared()).sum();
            prop_assert!(le(phi_dense(&next, &wt), phi_dense(&x, &wt) + lin + l_t / 2.0 * sq));
            x = next;
        }
    }

    #[test]
    fn small_steps_decrease_sufficiently(w in random_graph(), t in 1u32..=4, (d, r) in dims(), seed in any::<u64>(), u in 0.01f64..0.999) {
        let wt = naive_power(&w, t);
        let e = sorted_eigenvalues(&wt);
        let l_t = 1.0 - e[e.len() - 1];
        let x = NetworkState::random(w.n(), d, r, seed).unwrap();
        let grad = drcs_gradient(&x, &w, t).unwrap();
        let g2 = grad.norm_sq();
        let beta = 0.5;
        let alpha = u * (1.0 - beta) / (g2.sqrt() + l_t / 2.0);
        prop_assume!(alpha * grad.max_block_norm() <= 1.0);
        let next = drcs_step(&x, &w, t, alpha, Retraction::Polar).unwrap();
        prop_assert!(le(phi_dense(&next, &wt), phi_dense(&x, &wt) - alpha * beta * g2));
    }

    #[test]
    fn distance_to_consensus_is_monotone_in_nr(seed in 0u64..1_000_000, u in 0.05f64..1.0, t in prop::sample::select(vec![1u32, 8])) {
        let w = ring_matrix(8).unwrap();
        let setting = Setting::new(&w, t).unwrap();
        let sampler = RegionSampler::calibrate(&setting, 4, 2, RegionParams::maximal(8, 2), Region::NR, seed).unwrap();
        let mut x = sampler.draw(0).unwrap();
        let alpha = u / setting.l_t();
        let mut prev = dev(&x, &iam(&x).unwrap());
        for _ in 0..5 {
            x = drcs_step(&x, &w, t, alpha, Retraction::Polar).unwrap();
            let cur = dev(&x, &iam(&x).unwrap());
            prop_assert!(le(cur, prev));
            prev = cur;
        }
    }

    #[test]
    fn hemisphere_is_invariant(seed in any::<u64>(), t in 1u32..=4, alpha in 0.05f64..=1.0) {
        let w = ring_matrix(10).unwrap();
        let mut g = rng(seed);
        let y = random_stiefel_with(&mut g, 3, 1).unwrap();
        let blocks = (0..10)
            .map(|_| {
                let b = random_stiefel_with(&mut g, 3, 1).unwrap();
                let flip = frob_inner(b.as_matrix(), y.as_matrix()) < 0.0;
                StiefelPoint::new(if flip { -b.into_matrix() } else { b.into_matrix() }).unwrap()
            })
            .collect();
        let mut x = NetworkState::new(blocks).unwrap();
        let min_inner = |x: &NetworkState| x.matrices().map(|b| frob_inner(b, y.as_matrix())).fold(f64::INFINITY, f64::min);
        let delta = min_inner(&x);
        prop_assume!(delta > 0.0);
        for _ in 0..300 {
            x = drcs_step(&x, &w, t, alpha, Retraction::Polar).unwrap();
            prop_assert!(min_inner(&x) >= delta - 1e-12);
        }
    }

    #[test]
    fn message_passing_matches_matrix_iteration(w in random_graph(), t in 1u32..=4, (d, r) in dims(), seed in any::<u64>(), alpha in 0.1f64..1.5) {
        let mut x = NetworkState::random(w.n(), d, r, seed).unwrap();
        let mut net = NodeNetwork::new(&w, x.clone(), t, alpha, Retraction::Polar).unwrap();
        for _ in 0..10 {
            x = drcs_step(&x, &w, t, alpha, Retraction::Polar).unwrap();
            net.step().unwrap();
            prop_assert!(net.state().max_abs_diff(&x) <= 1e-12);
        }
        let audit = net.log().audit(&w, t);
        prop_assert_eq!(audit.non_neighbor, 0);
        prop_assert!(audit.clean());
    }

    #[test]
    fn euclidean_pgd_contracts_by_sigma2(w in random_graph(), seed in any::<u64>(), ball in any::<bool>()) {
        let mut g = rng(seed);
        // The start must lie in C^N so that its mean does too.
        let c = if ball { Projection::Ball(1.0) } else { Projection::Identity };
        let x0: Vec<Mat> = (0..w.n()).map(|_| c.apply(gaussian_matrix(&mut g, 3, 2))).collect();
        let trace = run_euclidean_pgd(x0, &w, 1.0, c, 60).unwrap();
        let s2 = sigma2_of(w.entries());
        // Ratios are only meaningful above the round-off floor of the deviation.
        let floor = 1e-9 * trace.deviations[0];
        for p in trace.deviations.windows(2).filter(|p| p[0] > floor) {
            prop_assert!(p[1] <= (s2 + 1e-6) * p[0], "{} > {} * {}", p[1], s2, p[0]);
        }
        let series = trace.consensus_series();
        if series.iter().all(|&v| v > floor * floor) {
            prop_assert!(estimate_rate_series(&series, 0.2).unwrap().per_step_ratio <= s2 + 1e-6);
        }
    }

    #[test]
    fn runs_are_deterministic_and_traces_complete(n in 3usize..10, seed in any::<u64>(), iters in 1usize..40, t in 1u32..=3) {
        let mut c = RunConfig::new(GraphSpec::ring(n), 4, 2);
        c.seed = seed;
        c.t = t;
        c.alpha = AlphaRule::Unit;
        c.max_iters = iters;
        let (a, xa) = run_drcs(&c).unwrap();
        let (b, xb) = run_drcs(&c).unwrap();
        prop_assert_eq!(a.to_csv_string(), b.to_csv_string());
        prop_assert_eq!(xa.max_abs_diff(&xb), 0.0);
        prop_assert_eq!(a.records().len(), a.iterations() + 1);
        prop_assert_eq!(a.to_csv_string().lines().count(), a.iterations() + 2);
        prop_assert!(a.records().windows(2).all(|p| p[1].k == p[0].k + 1));
        prop_assert!(a.records().iter().all(|rec| rec.phi >= 0.0 && rec.grad_norm_sq >= 0.0 && rec.consensus_sq >= 0.0));
    }
}

#[test]
fn total_variation_on_the_experiment_ring() {
    let w = ring_matrix(30).unwrap();
    let s2 = sigma2_of(w.entries());
    for t in [1, 10, 164] {
        let p = naive_power(&w, t);
        let tv = (0..30)
            .map(|i| (0..30).map(|j| (p[(i, j)] - 1.0 / 30.0).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(le(tv, 30f64.sqrt() * s2.powi(t as i32)), "t = {t}");
    }
}
