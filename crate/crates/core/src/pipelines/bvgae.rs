//! Link prediction with a VGAE retrained on a grafted learned graph.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{child_seeds, embedding_support, GraphStats, SupportMode};
use crate::data::{CitationDataset, LinkSplit};
use crate::distance::embedding_sq_euclidean;
use crate::error::{Error, Result};
use crate::graph::{graft, normalize_adjacency, WeightedGraph};
use crate::metrics::{average_precision, roc_auc};
use crate::nnet::{train_vgae, vgae_encode, ReconTarget, TrainConfig, VgaeParams};
use crate::solver::{solve_auto, AutoConfig};

/// Which graph supplies the reconstruction target when retraining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconSource {
    /// Training edges only; the grafted graph feeds the encoder.
    #[default]
    Observed,
    /// Every edge of the grafted graph counts as a positive.
    Grafted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvgaeConfig {
    pub vgae: TrainConfig,
    pub hidden: usize,
    pub latent: usize,
    pub k: usize,
    pub support: SupportMode,
    pub target_degree: f64,
    pub auto: AutoConfig,
    /// Keep only the `top_m` heaviest learned edges, as unit weights, before
    /// grafting.
    pub binarize: bool,
    /// Defaults to the number of training edges.
    pub top_m: Option<usize>,
    pub recon: ReconSource,
    /// Graft the observed graph onto itself instead of the learned one.
    pub identity_graft: bool,
}

impl Default for BvgaeConfig {
    fn default() -> Self {
        BvgaeConfig {
            vgae: TrainConfig::vgae(),
            hidden: 32,
            latent: 16,
            k: 20,
            support: SupportMode::default(),
            target_degree: 10.0,
            auto: AutoConfig::default(),
            binarize: false,
            top_m: None,
            recon: ReconSource::default(),
            identity_graft: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub auc: f64,
    pub ap: f64,
    pub val_auc: Option<f64>,
    pub val_ap: Option<f64>,
    /// Test scores: positive pairs first, then sampled non-edges.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvgaeReport {
    pub baseline: LinkReport,
    pub bvgae: LinkReport,
    pub split_seed: u64,
    pub model_seed: u64,
    pub graph: Option<GraphStats>,
    pub grafted_edges: usize,
    pub warnings: Vec<String>,
}

/// `σ(μ_i · μ_j)` for every pair.
pub fn score_pairs(mu: ArrayView2<'_, f64>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| 1.0 / (1.0 + (-mu.row(i).dot(&mu.row(j))).exp()))
        .collect()
}

fn evaluate(
    mu: ArrayView2<'_, f64>,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<(f64, f64, Vec<f64>)> {
    let mut scores = score_pairs(mu, pos);
    scores.extend(score_pairs(mu, neg));
    let labels: Vec<bool> = (0..scores.len()).map(|k| k < pos.len()).collect();
    Ok((
        roc_auc(&scores, &labels)?,
        average_precision(&scores, &labels)?,
        scores,
    ))
}

fn report(mu: ArrayView2<'_, f64>, split: &LinkSplit) -> Result<LinkReport> {
    let (auc, ap, scores) = evaluate(mu, &split.test_edges, &split.test_non_edges)?;
    let (val_auc, val_ap) = if split.val_edges.is_empty() {
        (None, None)
    } else {
        let (a, p, _) = evaluate(mu, &split.val_edges, &split.val_non_edges)?;
        (Some(a), Some(p))
    };
    Ok(LinkReport {
        auc,
        ap,
        val_auc,
        val_ap,
        scores,
    })
}

/// Trains on `input` with reconstruction target `target`; returns the means.
fn fit(
    x: ArrayView2<'_, f64>,
    input: &WeightedGraph,
    target: &ReconTarget,
    cfg: &BvgaeConfig,
    seed: u64,
) -> Result<ndarray::Array2<f64>> {
    let a = normalize_adjacency(input);
    let vgae_cfg = cfg.vgae.clone().with_seed(seed);
    let p: VgaeParams<f64> = train_vgae(&a, x, target, cfg.hidden, cfg.latent, &vgae_cfg)?;
    Ok(vgae_encode(&p, &a, x, None)?.mu)
}

/// Baseline VGAE and its retrained counterpart on the grafted graph. Both
/// fits share one initialization and noise stream.
pub fn run_bvgae(
    ds: &CitationDataset,
    split: &LinkSplit,
    cfg: &BvgaeConfig,
    seed: u64,
) -> Result<BvgaeReport> {
    if split.train.n_nodes() != ds.n_nodes() {
        return Err(Error::Dimension(format!(
            "split has {} nodes, dataset {}",
            split.train.n_nodes(),
            ds.n_nodes()
        )));
    }
    if split.test_edges.is_empty() || split.test_non_edges.is_empty() {
        return Err(Error::InvalidArgument("empty test pairs".into()));
    }
    let [vgae_seed] = child_seeds(seed);
    let x = ds.dense_features::<f64>();
    let observed = &split.train;
    let obs_target = ReconTarget::with_self_loops(observed)?;
    let mu = fit(x.view(), observed, &obs_target, cfg, vgae_seed)?;
    let baseline = report(mu.view(), split)?;

    let mut warnings = Vec::new();
    let (grafted, stats) = if cfg.identity_graft {
        (observed.clone(), None)
    } else {
        let support = embedding_support(mu.view(), cfg.k, cfg.support, observed)?;
        let d = embedding_sq_euclidean(mu.view(), &support)?;
        let (result, theta) = solve_auto(&d, cfg.target_degree, &cfg.auto)?;
        let stats = GraphStats::from_result(&result, Some(theta));
        warnings.extend(stats.warning());
        let mut learned = result.to_graph();
        if cfg.binarize {
            learned = learned.top_m_binarized(cfg.top_m.unwrap_or(observed.n_edges()));
        }
        (
            graft(&learned, observed, &observed.pair_set())?,
            Some(stats),
        )
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    let target = match cfg.recon {
        ReconSource::Observed => obs_target,
        ReconSource::Grafted => ReconTarget::with_self_loops(&grafted)?,
    };
    let mu2 = fit(x.view(), &grafted, &target, cfg, vgae_seed)?;
    Ok(BvgaeReport {
        baseline,
        bvgae: report(mu2.view(), split)?,
        split_seed: split.seed,
        model_seed: seed,
        graph: stats,
        grafted_edges: grafted.n_edges(),
        warnings,
    })
}
