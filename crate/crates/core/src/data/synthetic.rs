//! Seeded synthetic datasets for tests, examples and benchmarks.

use std::collections::BTreeSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::citation::{row_normalize, CitationDataset};
use super::interactions::{filter_and_index, InteractionDataset};
use crate::error::{Error, Result};
use crate::graph::{largest_connected_component, WeightedGraph};

/// Standard Gaussian point cloud `[n × dim]`.
pub fn gaussian_points(n: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, dim), |_| StandardNormal.sample(&mut rng))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedPartition {
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Expected degree contributed by same-class neighbours.
    pub degree_in: f64,
    /// Expected degree contributed by other-class neighbours.
    pub degree_out: f64,
    /// Active words per node.
    pub words: usize,
    /// Probability that a word is drawn from the node's class vocabulary.
    pub word_signal: f64,
}

impl Default for PlantedPartition {
    fn default() -> Self {
        PlantedPartition {
            n_nodes: 600,
            n_classes: 4,
            n_features: 200,
            degree_in: 3.0,
            degree_out: 1.0,
            words: 12,
            word_signal: 0.4,
        }
    }
}

/// Citation-like corpus with homophilous edges and class-biased binary
/// bag-of-words features, restricted to its largest component.
pub fn planted_partition(cfg: &PlantedPartition, seed: u64) -> Result<CitationDataset> {
    let PlantedPartition {
        n_nodes: n,
        n_classes: c,
        n_features: f,
        ..
    } = *cfg;
    if n < 2 || c == 0 || f < c || cfg.words == 0 {
        return Err(Error::InvalidArgument(
            "degenerate planted partition".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
    let mut by_class = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut pairs = BTreeSet::new();
    let m_in = (cfg.degree_in * n as f64 / 2.0).round() as usize;
    let m_out = (cfg.degree_out * n as f64 / 2.0).round() as usize;
    while pairs.len() < m_in {
        let class = &by_class[rng.random_range(0..c)];
        let (a, b) = (
            class[rng.random_range(0..class.len())],
            class[rng.random_range(0..class.len())],
        );
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    if c > 1 {
        let target = pairs.len() + m_out;
        while pairs.len() < target {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if labels[a] != labels[b] {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let vocab = f / c;
    let mut triplets = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        let mut words = BTreeSet::new();
        while words.len() < cfg.words.min(f) {
            let w = if rng.random::<f64>() < cfg.word_signal {
                l * vocab + rng.random_range(0..vocab)
            } else {
                rng.random_range(0..f)
            };
            words.insert(w);
        }
        triplets.extend(words.into_iter().map(|w| (i, w, 1.0)));
    }
    let graph = WeightedGraph::from_pairs(n, pairs)?;
    let full = CitationDataset {
        graph,
        features: row_normalize(n, f, &mut triplets),
        labels,
        class_names: (0..c).map(|k| format!("class{k}")).collect(),
        node_ids: (0..n).map(|i| format!("p{i}")).collect(),
        dangling_citations: 0,
    };
    let (lcc, keep) = largest_connected_component(&full.graph)?;
    Ok(full.reindexed(lcc, &keep))
}

/// Implicit feedback from a low-rank preference model: each user interacts
/// with its `per_user` highest-affinity items after Gumbel perturbation.
pub fn latent_interactions(
    n_users: usize,
    n_items: usize,
    rank: usize,
    per_user: usize,
    seed: u64,
) -> Result<InteractionDataset> {
    if per_user == 0 || per_user > n_items || rank == 0 {
        return Err(Error::InvalidArgument(
            "degenerate latent interaction model".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Array2<f64> =
        Array2::from_shape_fn((n_users, rank), |_| StandardNormal.sample(&mut rng));
    let v: Array2<f64> =
        Array2::from_shape_fn((n_items, rank), |_| StandardNormal.sample(&mut rng));
    let affinity = u.dot(&v.t());
    let popularity: Vec<f64> = (0..n_items).map(|i| -0.5 * ((i + 1) as f64).ln()).collect();
    let mut pairs = Vec::with_capacity(n_users * per_user);
    for user in 0..n_users {
        let mut scored: Vec<(f64, usize)> = (0..n_items)
            .map(|i| {
                let g: f64 = -(-rng.random::<f64>().max(1e-300).ln()).ln();
                (affinity[[user, i]] + popularity[i] + g, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut chosen: Vec<usize> = scored[..per_user].iter().map(|&(_, i)| i).collect();
        chosen.shuffle(&mut rng);
        pairs.extend(
            chosen
                .into_iter()
                .map(|i| (user.to_string(), i.to_string())),
        );
    }
    Ok(filter_and_index(pairs, 0, 0))
}
