//! Maximum a posteriori graph estimation.
//!
//! Over nonnegative symmetric adjacencies `A` restricted to a candidate
//! support, the solvers minimize
//!
//! ```text
//! ‖A ∘ D‖₁,₁ − α·1ᵀlog(A1) + β‖A‖²_F
//! ```
//!
//! which in edge-vector form (one weight per unordered pair, `S` the
//! node–edge incidence) reads `f(w) = 2dᵀw − α Σᵢ log((Sw)ᵢ) + 2β‖w‖²`.
//!
//! The degree barrier keeps every node connected. Two schemes are provided:
//! exact cyclic coordinate descent (default; monotone objective trace) and a
//! forward–backward–forward primal–dual iteration.

mod auto;
mod coordinate;
mod primal_dual;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

pub use auto::{solve_auto, AutoConfig};

/// Weights below this are treated as inactive by the KKT check.
pub const ACTIVE_THRESHOLD: f64 = 1e-10;

/// An edge counts as present when `w > PRESENT_RELATIVE · max(w)`.
pub const PRESENT_RELATIVE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    CoordinateDescent,
    PrimalDual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub max_iters: usize,
    /// Relative objective change treated as no progress (stall detection).
    pub tol: f64,
    /// Largest admissible KKT violation at convergence.
    pub kkt_tol: f64,
    /// Primal–dual step size; derived from the support when absent.
    pub step: Option<f64>,
    pub scheme: Scheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 1.0,
            beta: 1.0,
            max_iters: 20_000,
            tol: 1e-15,
            kkt_tol: 1e-7,
            step: None,
            scheme: Scheme::CoordinateDescent,
        }
    }
}

impl SolverConfig {
    pub fn with_alpha_beta(alpha: f64, beta: f64) -> Self {
        SolverConfig {
            alpha,
            beta,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} must be > 0",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta = {} must be > 0",
                self.beta
            )));
        }
        if !(self.tol > 0.0) || !(self.kkt_tol > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be > 0".into()));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::InvalidArgument(format!("step {s} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub n_nodes: usize,
    /// Support pairs the weights are aligned to.
    pub pairs: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl SolverResult {
    pub fn degrees(&self) -> Vec<f64> {
        degrees(self.n_nodes, &self.pairs, &self.weights)
    }

    pub fn min_degree(&self) -> f64 {
        self.degrees().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// Number of edges with `w > 1e-4 · max(w)`.
    pub fn present_edges(&self) -> usize {
        let cut = PRESENT_RELATIVE * self.max_weight();
        self.weights.iter().filter(|&&w| w > cut).count()
    }

    /// Mean node degree counting only present edges.
    pub fn mean_degree(&self) -> f64 {
        if self.n_nodes == 0 {
            return 0.0;
        }
        2.0 * self.present_edges() as f64 / self.n_nodes as f64
    }

    pub fn density(&self) -> f64 {
        let n = self.n_nodes as f64;
        if n < 2.0 {
            return 0.0;
        }
        self.present_edges() as f64 / (n * (n - 1.0) / 2.0)
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Learned graph with every strictly positive weight, untruncated.
    pub fn to_graph(&self) -> WeightedGraph {
        WeightedGraph::new(
            self.n_nodes,
            self.pairs
                .iter()
                .zip(&self.weights)
                .map(|(&(i, j), &w)| (i, j, w)),
        )
        .expect("solver output is a valid graph")
    }

    pub fn sidecar(&self, alpha: f64, beta: f64, theta: Option<f64>) -> Sidecar {
        Sidecar {
            alpha,
            beta,
            theta,
            iterations: self.iterations,
            converged: self.converged,
            kkt_residual: self.kkt_residual,
            objective: self.final_objective(),
            n_nodes: self.n_nodes,
            n_support: self.pairs.len(),
            n_present: self.present_edges(),
            mean_degree: self.mean_degree(),
            min_degree: self.min_degree(),
        }
    }
}

/// JSON companion to an exported learned edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub alpha: f64,
    pub beta: f64,
    pub theta: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub objective: f64,
    pub n_nodes: usize,
    pub n_support: usize,
    pub n_present: usize,
    pub mean_degree: f64,
    pub min_degree: f64,
}

impl Sidecar {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn degrees(n: usize, pairs: &[(usize, usize)], w: &[f64]) -> Vec<f64> {
    let mut deg = vec![0.0; n];
    for (&(i, j), &x) in pairs.iter().zip(w) {
        deg[i] += x;
        deg[j] += x;
    }
    deg
}

/// Neumaier-compensated sum.
pub(crate) fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn objective_parts(
    n: usize,
    pairs: &[(usize, usize)],
    d: &[f64],
    w: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    let deg = degrees(n, pairs, w);
    if let Some(i) = deg.iter().position(|&x| x <= 0.0) {
        return Err(Error::ZeroDegree(i));
    }
    let linear = stable_sum(d.iter().zip(w).map(|(a, b)| 2.0 * a * b));
    let barrier = stable_sum(deg.iter().map(|x| x.ln()));
    let quad = stable_sum(w.iter().map(|x| 2.0 * beta * x * x));
    Ok(linear - alpha * barrier + quad)
}

/// Edge-vector objective `2dᵀw − α Σ log(Sw) + 2β‖w‖²`.
pub fn objective(weights: &[f64], d: &DistanceMatrix, alpha: f64, beta: f64) -> Result<f64> {
    if weights.len() != d.len() {
        return Err(Error::Dimension(format!(
            "{} weights for {} support pairs",
            weights.len(),
            d.len()
        )));
    }
    objective_parts(d.n_nodes(), d.pairs(), d.values(), weights, alpha, beta)
}

pub(crate) fn kkt_parts(
    n: usize,
    pairs: &[(usize, usize)],
    d: &[f64],
    w: &[f64],
    alpha: f64,
    beta: f64,
) -> f64 {
    let deg = degrees(n, pairs, w);
    let mut worst = 0.0f64;
    for ((&(i, j), &de), &we) in pairs.iter().zip(d).zip(w) {
        let g = 2.0 * de - alpha * (1.0 / deg[i] + 1.0 / deg[j]) + 4.0 * beta * we;
        let violation = if we > ACTIVE_THRESHOLD {
            g.abs()
        } else {
            (-g).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst
}

/// Largest violation of the first-order conditions for `w ≥ 0`:
/// `|g_e|` on active edges, `max(0, −g_e)` on inactive ones.
pub fn kkt_residual(weights: &[f64], d: &DistanceMatrix, alpha: f64, beta: f64) -> f64 {
    kkt_parts(d.n_nodes(), d.pairs(), d.values(), weights, alpha, beta)
}

fn check_coverage(d: &DistanceMatrix) -> Result<()> {
    if d.n_nodes() == 0 {
        return Err(Error::EmptyGraph);
    }
    if let Some(i) = d.support_degrees().iter().position(|&c| c == 0) {
        return Err(Error::IsolatedNode(i));
    }
    Ok(())
}

/// Per-edge minimizer when the edge is the only one at both endpoints:
/// the positive root of `2d − 2α/w + 4βw = 0`. It also bounds the coordinate
/// minimizer from above whatever the other edges carry.
pub(crate) fn isolated_edge_optimum(d: f64, alpha: f64, beta: f64) -> f64 {
    (-d + (d * d + 8.0 * alpha * beta).sqrt()) / (4.0 * beta)
}

/// Solves the MAP problem on the support of `d`.
pub fn solve(d: &DistanceMatrix, cfg: &SolverConfig) -> Result<SolverResult> {
    solve_from(d, cfg, None)
}

/// As [`solve`], starting from `init` weights (must keep all degrees > 0).
pub fn solve_from(
    d: &DistanceMatrix,
    cfg: &SolverConfig,
    init: Option<&[f64]>,
) -> Result<SolverResult> {
    cfg.validate()?;
    check_coverage(d)?;
    if let Some(w) = init {
        if w.len() != d.len() {
            return Err(Error::Dimension(format!(
                "{} initial weights for {} pairs",
                w.len(),
                d.len()
            )));
        }
    }
    match cfg.scheme {
        Scheme::CoordinateDescent => Ok(coordinate::solve(d, cfg, init)),
        Scheme::PrimalDual => Ok(primal_dual::solve(d, cfg, init)),
    }
}

/// Solve restricted to a user–item support on the joint node set
/// (users `0..n_users`, items after). Same-side pairs are rejected.
pub fn solve_bipartite(
    d: &DistanceMatrix,
    n_users: usize,
    cfg: &SolverConfig,
) -> Result<SolverResult> {
    if n_users > d.n_nodes() {
        return Err(Error::Dimension(format!(
            "{n_users} users for {} joint nodes",
            d.n_nodes()
        )));
    }
    if let Some(&(i, j)) = d
        .pairs()
        .iter()
        .find(|&&(i, j)| !(i < n_users && j >= n_users))
    {
        return Err(Error::InvalidArgument(format!(
            "pair ({i},{j}) is not a user-item pair"
        )));
    }
    solve(d, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_nodes(dval: f64) -> DistanceMatrix {
        DistanceMatrix::new(2, vec![(0, 1)], vec![dval]).unwrap()
    }

    #[test]
    fn objective_single_edge() {
        let f = objective(&[0.5], &two_nodes(1.0), 1.0, 1.0).unwrap();
        let expected = 1.0 - 2.0 * 0.5f64.ln() + 0.5;
        assert!((f - expected).abs() < 1e-15);
        assert!((f - 2.886294).abs() < 1e-6);
    }

    #[test]
    fn objective_zero_degree_is_domain_error() {
        let d = DistanceMatrix::new(3, vec![(0, 1), (1, 2)], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            objective(&[1.0, 0.0], &d, 1.0, 1.0),
            Err(Error::ZeroDegree(2))
        ));
    }

    #[test]
    fn objective_decreasing_without_distance_and_ridge() {
        let d = DistanceMatrix::new(3, vec![(0, 1), (1, 2), (0, 2)], vec![0.0; 3]).unwrap();
        let base = [0.3, 0.4, 0.5];
        let f0 = objective(&base, &d, 1.0, 1e-300).unwrap();
        for e in 0..3 {
            let mut w = base;
            w[e] += 0.1;
            assert!(objective(&w, &d, 1.0, 1e-300).unwrap() < f0);
        }
    }

    #[test]
    fn closed_form_two_nodes() {
        for scheme in [Scheme::CoordinateDescent, Scheme::PrimalDual] {
            let cfg = SolverConfig {
                scheme,
                ..Default::default()
            };
            let r = solve(&two_nodes(1.0), &cfg).unwrap();
            assert!(r.converged, "{scheme:?}");
            assert!(
                (r.weights[0] - 0.5).abs() < 1e-8,
                "{scheme:?}: {}",
                r.weights[0]
            );
        }
        assert!((isolated_edge_optimum(1.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn isolated_node_rejected() {
        let d = DistanceMatrix::new(3, vec![(0, 1)], vec![1.0]).unwrap();
        assert!(matches!(
            solve(&d, &SolverConfig::default()),
            Err(Error::IsolatedNode(2))
        ));
    }

    #[test]
    fn bad_config_rejected() {
        let cfg = SolverConfig::with_alpha_beta(0.0, 1.0);
        assert!(solve(&two_nodes(1.0), &cfg).is_err());
    }

    #[test]
    fn bipartite_rejects_same_side_pairs() {
        let d = DistanceMatrix::new(3, vec![(0, 1)], vec![1.0]).unwrap();
        assert!(solve_bipartite(&d, 2, &SolverConfig::default()).is_err());
        let one = DistanceMatrix::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        let r = solve_bipartite(&one, 1, &SolverConfig::default()).unwrap();
        assert!((r.weights[0] - 0.5).abs() < 1e-8);
    }
}
