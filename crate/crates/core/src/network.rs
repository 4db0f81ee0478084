//! Communication matrices: construction, validation against the doubly
//! stochastic assumptions, powers, and spectral constants.

use std::fmt;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::manifold::Mat;

/// Tolerance on `||W - W^T||_F` and on each row sum.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Eigenvalues within this of `-1` or above `1 + tol` are rejected.
pub const EIGEN_TOL: f64 = 1e-12;
/// The graph counts as disconnected when `lambda_2 >= 1 - CONNECTIVITY_GAP`.
pub const CONNECTIVITY_GAP: f64 = 1e-10;

/// One violated clause of the mixing-matrix assumptions.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NotSquare { rows: usize, cols: usize },
    TooSmall { n: usize },
    NonFinite,
    Asymmetric { deviation: f64 },
    NegativeEntry { row: usize, col: usize, value: f64 },
    Diagonal { index: usize, value: f64 },
    RowSum { row: usize, sum: f64 },
    Eigenvalue { value: f64 },
    Disconnected { lambda2: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { rows, cols } => write!(f, "not square ({rows}x{cols})"),
            Violation::TooSmall { n } => write!(f, "needs at least 2 nodes, got {n}"),
            Violation::NonFinite => write!(f, "non-finite entry"),
            Violation::Asymmetric { deviation } => {
                write!(f, "not symmetric (||W - W^T||_F = {deviation:e})")
            }
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "negative entry W[{row},{col}] = {value}")
            }
            Violation::Diagonal { index, value } => {
                write!(f, "diagonal W[{index},{index}] = {value} outside (0, 1)")
            }
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::Eigenvalue { value } => write!(f, "eigenvalue {value} outside (-1, 1]"),
            Violation::Disconnected { lambda2 } => {
                write!(f, "graph is disconnected (lambda_2 = {lambda2})")
            }
        }
    }
}

/// Eigenvalues of a symmetric matrix in descending order.
fn sorted_eigenvalues(w: &Mat) -> Vec<f64> {
    let mut lambdas: Vec<f64> = SymmetricEigen::new(w.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    lambdas
}

/// Lists every violated clause; an empty list means `w` is a valid mixing
/// matrix of a connected graph.
pub fn validate(w: &Mat) -> Vec<Violation> {
    let (rows, cols) = w.shape();
    if rows != cols {
        return vec![Violation::NotSquare { rows, cols }];
    }
    if rows < 2 {
        return vec![Violation::TooSmall { n: rows }];
    }
    if w.iter().any(|v| !v.is_finite()) {
        return vec![Violation::NonFinite];
    }
    let n = rows;
    let mut out = Vec::new();
    let deviation = (w - w.transpose()).norm();
    if deviation > STOCHASTIC_TOL {
        out.push(Violation::Asymmetric { deviation });
    }
    for i in 0..n {
        for j in 0..n {
            if w[(i, j)] < 0.0 {
                out.push(Violation::NegativeEntry {
                    row: i,
                    col: j,
                    value: w[(i, j)],
                });
            }
        }
        let wii = w[(i, i)];
        if !(wii > 0.0 && wii < 1.0) {
            out.push(Violation::Diagonal {
                index: i,
                value: wii,
            });
        }
        let sum: f64 = w.row(i).iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation::RowSum { row: i, sum });
        }
    }
    // Spectral clauses only make sense for a symmetric matrix.
    if deviation <= STOCHASTIC_TOL {
        let lambdas = sorted_eigenvalues(w);
        for &l in &lambdas {
            if l <= -1.0 + EIGEN_TOL || l > 1.0 + EIGEN_TOL {
                out.push(Violation::Eigenvalue { value: l });
            }
        }
        if lambdas[1] >= 1.0 - CONNECTIVITY_GAP {
            out.push(Violation::Disconnected {
                lambda2: lambdas[1],
            });
        }
    }
    out
}

/// A symmetric doubly stochastic matrix of a connected graph.
#[derive(Clone, Debug)]
pub struct MixingMatrix {
    entries: Mat,
    /// Eigenvalues in descending order.
    eigenvalues: Vec<f64>,
}

impl MixingMatrix {
    pub fn new(entries: Mat) -> Result<Self> {
        let violations = validate(&entries);
        if violations.is_empty() {
            let eigenvalues = sorted_eigenvalues(&entries);
            Ok(MixingMatrix {
                entries,
                eigenvalues,
            })
        } else if let [Violation::Disconnected { lambda2 }] = violations.as_slice() {
            Err(Error::NotConnected { lambda2: *lambda2 })
        } else {
            Err(Error::InvalidMixingMatrix(violations))
        }
    }

    pub fn entries(&self) -> &Mat {
        &self.entries
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `(W + I) / 2`.
    pub fn lazy(&self) -> MixingMatrix {
        MixingMatrix::new(lazy_matrix(&self.entries))
            .expect("the lazy version of a valid mixing matrix is valid")
    }

    /// `W^t` by repeated squaring.
    pub fn power(&self, t: u32) -> Result<MixingMatrix> {
        matrix_power(self, t)
    }

    pub fn spectral_profile(&self, t: u32) -> Result<SpectralProfile> {
        spectral_profile(self, t)
    }

    /// Nonzero entries of row `i` (self included) in ascending column order.
    pub fn row_support(&self, i: usize) -> Vec<(usize, f64)> {
        (0..self.n())
            .filter_map(|j| {
                let w = self.entries[(i, j)];
                (w != 0.0).then_some((j, w))
            })
            .collect()
    }

    /// Neighbors of `i`, excluding `i` itself, in ascending order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n())
            .filter(|&j| j != i && self.entries[(i, j)] != 0.0)
            .collect()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.entries[(i, j)] != 0.0
    }

    /// Number of undirected edges (pairs `i < j` with `W_ij > 0`).
    pub fn edge_count(&self) -> usize {
        let n = self.n();
        (0..n)
            .map(|i| {
                ((i + 1)..n)
                    .filter(|&j| self.entries[(i, j)] != 0.0)
                    .count()
            })
            .sum()
    }
}

pub fn lazy_matrix(w: &Mat) -> Mat {
    let n = w.nrows();
    (w + Mat::identity(n, n)) * 0.5
}

/// Circulant ring matrix: `1/3` on the diagonal and on both cyclic neighbors.
pub fn ring_matrix(n: usize) -> Result<MixingMatrix> {
    if n < 3 {
        return Err(Error::config(
            "N",
            format!("ring graph needs N >= 3, got {n}"),
        ));
    }
    let third = 1.0 / 3.0;
    let mut w = Mat::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = third;
        w[(i, (i + 1) % n)] = third;
        w[(i, (i + n - 1) % n)] = third;
    }
    MixingMatrix::new(w)
}

/// The consensus projector `J = (1/N) 1 1^T`.
pub fn complete_matrix(n: usize) -> Result<MixingMatrix> {
    if n < 2 {
        return Err(Error::config(
            "N",
            format!("complete graph needs N >= 2, got {n}"),
        ));
    }
    MixingMatrix::new(Mat::from_element(n, n, 1.0 / n as f64))
}

/// `W^t` by repeated squaring; the result is revalidated.
pub fn matrix_power(w: &MixingMatrix, t: u32) -> Result<MixingMatrix> {
    if t == 0 {
        return Err(Error::config("t", "the power t must be at least 1"));
    }
    if t == 1 {
        return Ok(w.clone());
    }
    let mut base = w.entries.clone();
    let mut acc: Option<Mat> = None;
    let mut e = t;
    loop {
        if e & 1 == 1 {
            acc = Some(match acc {
                None => base.clone(),
                Some(a) => &a * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    let p = acc.expect("t >= 1");
    // Products of different powers are symmetric only up to rounding.
    let p = (&p + p.transpose()) * 0.5;
    MixingMatrix::new(p)
}

/// Spectral constants of `W` and of `W^t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralProfile {
    pub n: usize,
    pub t: u32,
    /// Eigenvalues of `W`, descending.
    pub lambdas: Vec<f64>,
    /// `1 - lambda_2(W^t)`.
    pub mu_t: f64,
    /// `1 - lambda_N(W^t)`.
    pub l_t: f64,
    /// Second largest singular value of `W`.
    pub sigma2: f64,
    /// `1 - lambda_2(W)`.
    pub mu: f64,
    /// `1 - lambda_N(W)`.
    pub l: f64,
}

impl SpectralProfile {
    pub fn lambda2(&self) -> f64 {
        self.lambdas[1]
    }

    pub fn lambda_min(&self) -> f64 {
        *self.lambdas.last().expect("N >= 2")
    }

    /// `sigma_2^t`, the per-round contraction of `t`-step Euclidean consensus.
    pub fn sigma2_pow_t(&self) -> f64 {
        self.sigma2.powi(self.t as i32)
    }

    /// `(L_t - mu_t) / (L_t + mu_t)`.
    pub fn condition_rate(&self) -> f64 {
        (self.l_t - self.mu_t) / (self.l_t + self.mu_t)
    }

    pub fn min_multistep_t(&self) -> u32 {
        min_multistep_t_for(self.sigma2, self.n)
    }
}

pub fn spectral_profile(w: &MixingMatrix, t: u32) -> Result<SpectralProfile> {
    if t == 0 {
        return Err(Error::config("t", "the power t must be at least 1"));
    }
    let lambdas = w.eigenvalues.clone();
    let n = lambdas.len();
    if lambdas[1] >= 1.0 - CONNECTIVITY_GAP {
        return Err(Error::NotConnected {
            lambda2: lambdas[1],
        });
    }
    // W is symmetric, so the spectrum of W^t is {lambda^t}; re-sort since odd
    // and even powers reorder negative eigenvalues.
    let mut powered: Vec<f64> = lambdas.iter().map(|l| l.powi(t as i32)).collect();
    powered.sort_by(|a, b| b.total_cmp(a));
    let sigma2 = lambdas[1].abs().max(lambdas[n - 1].abs());
    Ok(SpectralProfile {
        n,
        t,
        mu_t: 1.0 - powered[1],
        l_t: 1.0 - powered[n - 1],
        sigma2,
        mu: 1.0 - lambdas[1],
        l: 1.0 - lambdas[n - 1],
        lambdas,
    })
}

/// Smallest `t` with `sqrt(N) sigma_2^t <= 1/2`, i.e.
/// `ceil(ln(1/(2 sqrt N)) / ln sigma_2)`; `1` when `sigma_2 = 0`.
pub fn min_multistep_t(w: &MixingMatrix) -> Result<u32> {
    Ok(spectral_profile(w, 1)?.min_multistep_t())
}

pub fn min_multistep_t_for(sigma2: f64, n: usize) -> u32 {
    if sigma2 <= 0.0 {
        return 1;
    }
    let target = (1.0 / (2.0 * (n as f64).sqrt())).ln();
    let t = (target / sigma2.ln()).ceil();
    if t < 1.0 {
        1
    } else {
        t as u32
    }
}

/// One line of an edge list: `i j [weight]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: Option<f64>,
}

/// Parses a plain-text edge list. Blank lines and `#` comments are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<Edge>> {
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::EdgeList {
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!("expected `i j [weight]`, got `{line}`")));
        }
        let parse_idx = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| err(format!("`{s}` is not a node index")))
        };
        let i = parse_idx(fields[0])?;
        let j = parse_idx(fields[1])?;
        let weight = match fields.get(2) {
            Some(s) => Some(
                s.parse::<f64>()
                    .map_err(|_| err(format!("`{s}` is not a weight")))?,
            ),
            None => None,
        };
        if i == j {
            return Err(err(format!("self loop on node {i}")));
        }
        edges.push(Edge { i, j, weight });
    }
    Ok(edges)
}

/// Builds a mixing matrix from undirected edges.
///
/// Without weights, Metropolis-Hastings weights `1 / (1 + max(deg_i, deg_j))`
/// are used; with weights, `W_ij = W_ji = weight`. Either way the diagonal
/// absorbs the remaining row mass. Mixing weighted and unweighted lines is an
/// error.
pub fn from_edges(n: usize, edges: &[Edge]) -> Result<MixingMatrix> {
    let weighted = edges.iter().filter(|e| e.weight.is_some()).count();
    if weighted != 0 && weighted != edges.len() {
        return Err(Error::config(
            "edges",
            "either every edge carries a weight or none does",
        ));
    }
    let mut adjacency = vec![vec![false; n]; n];
    for e in edges {
        if e.i >= n || e.j >= n {
            return Err(Error::config(
                "edges",
                format!("edge ({}, {}) references a node outside 0..{n}", e.i, e.j),
            ));
        }
        if adjacency[e.i][e.j] {
            return Err(Error::config(
                "edges",
                format!("duplicate edge ({}, {})", e.i, e.j),
            ));
        }
        adjacency[e.i][e.j] = true;
        adjacency[e.j][e.i] = true;
    }
    let degree: Vec<usize> = adjacency
        .iter()
        .map(|row| row.iter().filter(|&&a| a).count())
        .collect();
    let mut w = Mat::zeros(n, n);
    for e in edges {
        let v = e
            .weight
            .unwrap_or_else(|| 1.0 / (1 + degree[e.i].max(degree[e.j])) as f64);
        w[(e.i, e.j)] = v;
        w[(e.j, e.i)] = v;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    MixingMatrix::new(w)
}

/// Which communication graph to build.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphKind {
    Ring,
    Complete,
    Custom(Vec<Edge>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphSpec {
    pub kind: GraphKind,
    pub n: usize,
    /// Replace `W` by `(W + I) / 2`.
    pub lazy: bool,
}

impl GraphSpec {
    pub fn ring(n: usize) -> Self {
        GraphSpec {
            kind: GraphKind::Ring,
            n,
            lazy: false,
        }
    }

    pub fn complete(n: usize) -> Self {
        GraphSpec {
            kind: GraphKind::Complete,
            n,
            lazy: false,
        }
    }

    pub fn lazy(mut self, lazy: bool) -> Self {
        self.lazy = lazy;
        self
    }

    pub fn build(&self) -> Result<MixingMatrix> {
        let w = match &self.kind {
            GraphKind::Ring => ring_matrix(self.n)?,
            GraphKind::Complete => complete_matrix(self.n)?,
            GraphKind::Custom(edges) => from_edges(self.n, edges)?,
        };
        Ok(if self.lazy { w.lazy() } else { w })
    }

    /// Short identifier such as `ring30` or `lazy-ring30`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            GraphKind::Ring => "ring",
            GraphKind::Complete => "complete",
            GraphKind::Custom(_) => "custom",
        };
        if self.lazy {
            format!("lazy-{base}{}", self.n)
        } else {
            format!("{base}{}", self.n)
        }
    }
}
