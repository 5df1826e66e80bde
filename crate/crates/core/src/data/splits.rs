//! Seeded train/validation/test partitions.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{pair, BipartiteGraph, WeightedGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSplit {
    /// Observed graph with validation and test edges removed.
    pub train: WeightedGraph,
    pub val_edges: Vec<(usize, usize)>,
    pub val_non_edges: Vec<(usize, usize)>,
    pub test_edges: Vec<(usize, usize)>,
    pub test_non_edges: Vec<(usize, usize)>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionSplit {
    pub train: BipartiteGraph,
    pub val: BipartiteGraph,
    pub test: BipartiteGraph,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitBundle {
    Labels(LabelSplit),
    Links(LinkSplit),
    Interactions(InteractionSplit),
}

/// Default number of validation nodes for label splits.
pub const DEFAULT_VAL_NODES: usize = 500;

/// `per_class` training nodes from every class, then `val_size` validation
/// nodes from the rest; everything left is test. Index lists are sorted.
pub fn split_labels(
    labels: &[usize],
    n_classes: usize,
    per_class: usize,
    val_size: usize,
    seed: u64,
) -> Result<LabelSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        if c >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {c} of node {i} exceeds {n_classes} classes"
            )));
        }
        by_class[c].push(i);
    }
    let mut train = Vec::with_capacity(per_class * n_classes);
    let mut rest = Vec::new();
    for (c, mut nodes) in by_class.into_iter().enumerate() {
        if nodes.len() < per_class {
            return Err(Error::InvalidArgument(format!(
                "class {c} has {} nodes, fewer than {per_class}",
                nodes.len()
            )));
        }
        nodes.shuffle(&mut rng);
        train.extend_from_slice(&nodes[..per_class]);
        rest.extend_from_slice(&nodes[per_class..]);
    }
    rest.sort_unstable();
    rest.shuffle(&mut rng);
    if rest.len() < val_size {
        return Err(Error::InvalidArgument(format!(
            "{} unlabeled nodes cannot supply {val_size} validation nodes",
            rest.len()
        )));
    }
    let mut val = rest[..val_size].to_vec();
    let mut test = rest[val_size..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(LabelSplit {
        train,
        val,
        test,
        seed,
    })
}

/// Edge partition with `⌊val_frac·m⌋` validation and `⌊test_frac·m⌋` test
/// edges, each paired with as many uniformly sampled non-edges.
pub fn split_links(
    g: &WeightedGraph,
    val_frac: f64,
    test_frac: f64,
    seed: u64,
) -> Result<LinkSplit> {
    if !(val_frac >= 0.0 && test_frac >= 0.0 && val_frac + test_frac < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bad link split fractions {val_frac}/{test_frac}"
        )));
    }
    let n = g.n_nodes();
    let m = g.n_edges();
    let n_val = (val_frac * m as f64).floor() as usize;
    let n_test = (test_frac * m as f64).floor() as usize;
    let total_pairs = n * n.saturating_sub(1) / 2;
    if total_pairs - m < n_val + n_test {
        return Err(Error::InvalidArgument(format!(
            "only {} non-edges for {} required",
            total_pairs - m,
            n_val + n_test
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize, f64)> = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let strip = |e: &[(usize, usize, f64)]| {
        let mut v: Vec<(usize, usize)> = e.iter().map(|&(i, j, _)| (i, j)).collect();
        v.sort_unstable();
        v
    };
    let test_edges = strip(&edges[..n_test]);
    let val_edges = strip(&edges[n_test..n_test + n_val]);
    let train = WeightedGraph::new(n, edges[n_test + n_val..].iter().copied())?;

    let existing = g.pair_set();
    let mut taken: HashSet<(usize, usize)> = HashSet::new();
    let mut draw = |count: usize, rng: &mut ChaCha8Rng| {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let p = pair(i, j);
            if existing.contains(&p) || !taken.insert(p) {
                continue;
            }
            out.push(p);
        }
        out.sort_unstable();
        out
    };
    let test_non_edges = draw(n_test, &mut rng);
    let val_non_edges = draw(n_val, &mut rng);
    Ok(LinkSplit {
        train,
        val_edges,
        val_non_edges,
        test_edges,
        test_non_edges,
        seed,
    })
}

/// Per-user counts `(train, val, test)` for `n` interactions with fractions
/// 70/10/20: validation and test round up, train keeps the rest.
pub fn interaction_split_sizes(n: usize) -> Result<(usize, usize, usize)> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "user with {n} interactions cannot be split"
        )));
    }
    let test = (0.2 * n as f64).ceil() as usize;
    let val = (0.1 * n as f64).ceil() as usize;
    Ok((n - val - test, val, test))
}

/// Per-user random 70/10/20 partition.
pub fn split_interactions(g: &BipartiteGraph, seed: u64) -> Result<InteractionSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tr, mut va, mut te) = (Vec::new(), Vec::new(), Vec::new());
    for (u, items) in g.user_items().into_iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let (_, n_val, n_test) = interaction_split_sizes(items.len()).map_err(|_| {
            Error::InvalidArgument(format!("user {u} has {} interactions, need 3", items.len()))
        })?;
        let mut items = items;
        items.shuffle(&mut rng);
        te.extend(items[..n_test].iter().map(|&i| (u, i, 1.0)));
        va.extend(items[n_test..n_test + n_val].iter().map(|&i| (u, i, 1.0)));
        tr.extend(items[n_test + n_val..].iter().map(|&i| (u, i, 1.0)));
    }
    let (nu, ni) = (g.n_users(), g.n_items());
    Ok(InteractionSplit {
        train: BipartiteGraph::new(nu, ni, tr)?,
        val: BipartiteGraph::new(nu, ni, va)?,
        test: BipartiteGraph::new(nu, ni, te)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_user_sizes() {
        assert_eq!(interaction_split_sizes(3).unwrap(), (1, 1, 1));
        assert_eq!(interaction_split_sizes(10).unwrap(), (7, 1, 2));
        assert!(interaction_split_sizes(2).is_err());
    }

    #[test]
    fn label_split_rejects_small_class() {
        assert!(split_labels(&[0, 0, 1], 2, 2, 0, 0).is_err());
    }

    #[test]
    fn link_split_arithmetic() {
        let pairs: Vec<(usize, usize)> = (0..100).map(|k| (k, k + 1)).collect();
        let g = WeightedGraph::from_pairs(101, pairs).unwrap();
        let s = split_links(&g, 0.05, 0.10, 3).unwrap();
        assert_eq!(
            (s.train.n_edges(), s.val_edges.len(), s.test_edges.len()),
            (85, 5, 10)
        );
        assert_eq!(s.val_non_edges.len(), 5);
        assert_eq!(s.test_non_edges.len(), 10);
    }
}
