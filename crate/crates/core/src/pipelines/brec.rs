//! BPR recommendation with a negative pool refined by a learned
//! user-item graph.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::{child_seeds, GraphStats};
use crate::data::InteractionSplit;
use crate::distance::cosine_bipartite;
use crate::error::{Error, Result};
use crate::graph::{refine_negative_pool, BipartiteGraph, NegativePool};
use crate::neighbors::bipartite_top_k;
use crate::nnet::{
    train_bpr, BprTrainLog, BprTrainState, PropagationGraph, RankingEval, TrainConfig,
};
use crate::solver::{solve_bipartite, SolverConfig};

/// Users need one interaction in each of train, validation and test.
pub const MIN_USER_INTERACTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrecConfig {
    /// Base training; `weight_decay` is the prior precision λ.
    pub bpr: TrainConfig,
    pub dim: usize,
    pub batch_size: usize,
    /// Temperature applied to cosine scores inside the BPR loss.
    pub score_scale: f64,
    pub continuation_epochs: usize,
    pub continuation_patience: usize,
    /// Candidate items per user for the learned graph.
    pub k: usize,
    pub fraction_grid: Vec<f64>,
    pub solver: SolverConfig,
    pub ks: Vec<usize>,
}

impl Default for BrecConfig {
    fn default() -> Self {
        BrecConfig {
            bpr: TrainConfig::bpr(),
            dim: 64,
            batch_size: 1024,
            score_scale: 5.0,
            continuation_epochs: 1000,
            continuation_patience: 100,
            k: 30,
            fraction_grid: vec![0.01, 0.02, 0.05, 0.10, 0.20],
            solver: SolverConfig::default(),
            ks: vec![10, 20],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecReport {
    /// Refinement fraction; 0 for the baseline continuation.
    pub fraction: f64,
    pub recall_at: BTreeMap<usize, f64>,
    pub ndcg_at: BTreeMap<usize, f64>,
    pub val_recall_at_20: f64,
    /// Negatives removed from the pool.
    pub removed: usize,
    /// Fraction of removed negatives that are validation or test edges.
    pub pool_overlap: f64,
    /// 99% quantile of that fraction under uniformly random removal.
    pub random_overlap_bound: f64,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrecReport {
    pub baseline: RecReport,
    pub arms: Vec<RecReport>,
    /// Index into `arms` chosen by validation Recall@20.
    pub selected: usize,
    pub selected_fraction: f64,
    pub base_epochs: usize,
    pub graph: GraphStats,
    pub split_seed: u64,
    pub model_seed: u64,
    pub warnings: Vec<String>,
}

impl BrecReport {
    pub fn selected_arm(&self) -> &RecReport {
        &self.arms[self.selected]
    }
}

/// Removes every interaction of users with fewer than `min` of them. Returns
/// the filtered graph and the excluded users.
pub fn drop_sparse_users(g: &BipartiteGraph, min: usize) -> Result<(BipartiteGraph, Vec<usize>)> {
    let counts: Vec<usize> = g.user_items().iter().map(Vec::len).collect();
    let excluded: Vec<usize> = (0..g.n_users())
        .filter(|&u| counts[u] > 0 && counts[u] < min)
        .collect();
    let kept = g
        .interactions()
        .iter()
        .copied()
        .filter(|&(u, _, _)| counts[u] >= min);
    Ok((
        BipartiteGraph::new(g.n_users(), g.n_items(), kept)?,
        excluded,
    ))
}

/// Upper 99% quantile of the overlap fraction when `removed` pairs are drawn
/// uniformly from a pool of `pool_size` holding `hits` held-out edges.
pub fn random_overlap_bound(removed: usize, pool_size: usize, hits: usize) -> Result<f64> {
    if removed == 0 || pool_size == 0 {
        return Ok(0.0);
    }
    let p = hits as f64 / pool_size as f64;
    let b = Binomial::new(p, removed as u64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(b.inverse_cdf(0.99) as f64 / removed as f64)
}

fn overlap(pool: &NegativePool, held_out: &HashSet<(usize, usize)>) -> f64 {
    let removed = pool.removed();
    if removed.is_empty() {
        return 0.0;
    }
    removed.iter().filter(|p| held_out.contains(p)).count() as f64 / removed.len() as f64
}

/// Learned user-item graph over per-user top-`k` unobserved candidates.
fn learn_bipartite(
    state: &BprTrainState<f64>,
    prop: &PropagationGraph,
    train: &BipartiteGraph,
    cfg: &BrecConfig,
) -> Result<(BipartiteGraph, GraphStats)> {
    let (nu, ni) = (train.n_users(), train.n_items());
    let (eu, ei) = state.embeddings(prop)?;
    let support = bipartite_top_k(
        nu,
        ni,
        cfg.k,
        |u, i| -eu.row(u).dot(&ei.row(i)),
        |u, i| train.contains(u, i),
    );
    let d = cosine_bipartite(eu.view(), ei.view(), &support)?;
    // Items outside every candidate list are left out of the solve.
    let (dc, map) = d.restrict_to_covered();
    let covered_users = map.iter().take_while(|&&v| v < nu).count();
    let result = solve_bipartite(&dc, covered_users, &cfg.solver)?;
    let stats = GraphStats::from_result(&result, None);
    let cut = 1e-4 * result.max_weight();
    let edges = result
        .pairs
        .iter()
        .zip(&result.weights)
        .filter(|&(_, &w)| w > cut)
        .map(|(&(a, b), &w)| (map[a], map[b] - nu, w));
    Ok((BipartiteGraph::new(nu, ni, edges)?, stats))
}

#[allow(clippy::too_many_arguments)]
fn continue_arm(
    base: &BprTrainState<f64>,
    prop: &PropagationGraph,
    split: &InteractionSplit,
    pool: &NegativePool,
    val_eval: &RankingEval,
    test_eval: &RankingEval,
    held_out: &HashSet<(usize, usize)>,
    fraction: f64,
    cfg: &BrecConfig,
) -> Result<RecReport> {
    let mut state = base.clone();
    let cont = TrainConfig {
        epochs: cfg.continuation_epochs,
        early_stop_patience: Some(cfg.continuation_patience),
        ..cfg.bpr.clone()
    };
    let log: BprTrainLog = train_bpr(
        &mut state,
        prop,
        &split.train,
        pool,
        val_eval,
        &cont,
        cfg.batch_size,
        cfg.score_scale,
    )?;
    let (eu, ei) = state.embeddings(prop)?;
    let mut recall_at = BTreeMap::new();
    let mut ndcg_at = BTreeMap::new();
    for (k, r, n) in test_eval.evaluate(&eu, &ei, &cfg.ks) {
        recall_at.insert(k, r);
        ndcg_at.insert(k, n);
    }
    let full = NegativePool::from_observed(&split.train).len();
    let removed = pool.removed().len();
    let hits = held_out.len();
    Ok(RecReport {
        fraction,
        recall_at,
        ndcg_at,
        val_recall_at_20: log.best_val_recall,
        removed,
        pool_overlap: overlap(pool, held_out),
        random_overlap_bound: random_overlap_bound(removed, full, hits)?,
        epochs_run: log.epochs_run,
        best_epoch: log.best_epoch,
    })
}

/// Base BPR training, graph learning over user-item candidates, then
/// continued training per refinement fraction alongside an unrefined
/// baseline continuation from the same state.
pub fn run_brec(split: &InteractionSplit, cfg: &BrecConfig, seed: u64) -> Result<BrecReport> {
    if cfg.fraction_grid.is_empty() {
        return Err(Error::InvalidArgument("empty fraction grid".into()));
    }
    if let Some(f) = cfg.fraction_grid.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!(
            "fraction {f} outside [0, 1]"
        )));
    }
    let train = &split.train;
    let (nu, ni) = (train.n_users(), train.n_items());
    let [bpr_seed] = child_seeds(seed);
    let prop = PropagationGraph::new(train);
    let pool0 = NegativePool::from_observed(train);
    let val_eval = RankingEval::new(&split.val, &[train]);
    let test_eval = RankingEval::new(&split.test, &[train, &split.val]);
    let held_out: HashSet<(usize, usize)> = split
        .val
        .interactions()
        .iter()
        .chain(split.test.interactions())
        .map(|&(u, i, _)| (u, i))
        .collect();

    let mut state = BprTrainState::new(nu, ni, cfg.dim, cfg.bpr.weight_decay, bpr_seed);
    let base_log = train_bpr(
        &mut state,
        &prop,
        train,
        &pool0,
        &val_eval,
        &cfg.bpr,
        cfg.batch_size,
        cfg.score_scale,
    )?;
    let (learned, graph) = learn_bipartite(&state, &prop, train, cfg)?;
    let mut warnings: Vec<String> = graph.warning().into_iter().collect();

    let arm = |pool: &NegativePool, fraction: f64| {
        continue_arm(
            &state, &prop, split, pool, &val_eval, &test_eval, &held_out, fraction, cfg,
        )
    };
    let baseline = arm(&pool0, 0.0)?;
    let mut arms = Vec::with_capacity(cfg.fraction_grid.len());
    for &f in &cfg.fraction_grid {
        let pool = if f == 0.0 {
            pool0.clone()
        } else {
            refine_negative_pool(&learned, train, f)?
        };
        if f > 0.0 && pool.removed().is_empty() {
            warnings.push(format!("fraction {f} removes no negatives"));
        }
        arms.push(arm(&pool, f)?);
    }
    let selected = (0..arms.len()).fold(0, |best, k| {
        if arms[k].val_recall_at_20 > arms[best].val_recall_at_20 {
            k
        } else {
            best
        }
    });
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(BrecReport {
        selected_fraction: arms[selected].fraction,
        baseline,
        arms,
        selected,
        base_epochs: base_log.epochs_run,
        graph,
        split_seed: split.seed,
        model_seed: seed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_bound_matches_cdf_sum() {
        // Binomial(20, 0.1): P(X <= 5) ≈ 0.9887, P(X <= 6) ≈ 0.9976.
        assert_eq!(random_overlap_bound(20, 1000, 100).unwrap(), 6.0 / 20.0);
        assert_eq!(random_overlap_bound(0, 1000, 100).unwrap(), 0.0);
    }

    #[test]
    fn sparse_users_dropped() {
        let g = BipartiteGraph::new(
            3,
            3,
            [
                (0, 0, 1.0),
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 0, 1.0),
                (1, 1, 1.0),
            ],
        )
        .unwrap();
        let (kept, excluded) = drop_sparse_users(&g, 3).unwrap();
        assert_eq!(excluded, vec![1]);
        assert_eq!(kept.n_interactions(), 3);
    }
}
