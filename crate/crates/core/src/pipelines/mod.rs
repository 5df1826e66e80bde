//! End-to-end graph-learning pipelines for node classification, link
//! prediction and recommendation.

mod bgcn;
mod brec;
mod bvgae;

pub use bgcn::{run_bgcn, run_gcn_baseline, BgcnConfig, BgcnReport};
pub use brec::{
    drop_sparse_users, random_overlap_bound, run_brec, BrecConfig, BrecReport, RecReport,
    MIN_USER_INTERACTIONS,
};
pub use bvgae::{run_bvgae, score_pairs, BvgaeConfig, BvgaeReport, LinkReport, ReconSource};

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{pair, WeightedGraph};
use crate::neighbors::{approx_knn, exact_knn};
use crate::solver::SolverResult;

/// Summary of a learned graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_nodes: usize,
    pub n_support: usize,
    pub n_present: usize,
    pub mean_degree: f64,
    pub density: f64,
    pub min_degree: f64,
    pub theta: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

impl GraphStats {
    pub fn from_result(r: &SolverResult, theta: Option<f64>) -> Self {
        GraphStats {
            n_nodes: r.n_nodes,
            n_support: r.pairs.len(),
            n_present: r.present_edges(),
            mean_degree: r.mean_degree(),
            density: r.density(),
            min_degree: r.min_degree(),
            theta,
            iterations: r.iterations,
            converged: r.converged,
            kkt_residual: r.kkt_residual,
        }
    }

    pub(crate) fn warning(&self) -> Option<String> {
        (!self.converged).then(|| {
            format!(
                "graph solver did not converge (kkt {:.3e}, mean degree {:.3}); using last iterate",
                self.kkt_residual, self.mean_degree
            )
        })
    }
}

/// Candidate support construction for point embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    Exact,
    Approximate {
        ef: usize,
    },
    /// Exact up to `max_exact` points, approximate beyond.
    Auto {
        max_exact: usize,
        ef: usize,
    },
}

impl Default for SupportMode {
    fn default() -> Self {
        SupportMode::Auto {
            max_exact: 5000,
            ef: 64,
        }
    }
}

/// k-NN pairs of the embedding rows, merged with `extra` pairs.
pub(crate) fn embedding_support(
    z: ArrayView2<'_, f64>,
    k: usize,
    mode: SupportMode,
    extra: &WeightedGraph,
) -> Result<Vec<(usize, usize)>> {
    let n = z.nrows();
    let k = k.min(n.saturating_sub(1));
    let exact = match mode {
        SupportMode::Exact => true,
        SupportMode::Approximate { .. } => false,
        SupportMode::Auto { max_exact, .. } => n <= max_exact,
    };
    let ef = match mode {
        SupportMode::Approximate { ef } | SupportMode::Auto { ef, .. } => ef,
        SupportMode::Exact => 0,
    };
    let set = if exact {
        exact_knn(z, k)?
    } else {
        approx_knn(z, k, ef)?
    };
    let mut pairs = set.pairs;
    pairs.extend(extra.edges().iter().map(|&(i, j, _)| pair(i, j)));
    pairs.sort_unstable();
    pairs.dedup();
    Ok(pairs)
}

/// Independent child seeds drawn from one trial seed, in a fixed order.
pub fn child_seeds<const N: usize>(seed: u64) -> [u64; N] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|_| rng.random())
}

pub(crate) fn argmax_rows(p: ArrayView2<'_, f64>) -> Vec<usize> {
    p.rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}
