//! Task-specific pairwise dissimilarities, materialized on a candidate support.

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Symmetric nonnegative dissimilarity stored on a list of unordered pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n_nodes: usize,
    pairs: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n_nodes: usize, pairs: Vec<(usize, usize)>, values: Vec<f64>) -> Result<Self> {
        if pairs.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} pairs but {} values",
                pairs.len(),
                values.len()
            )));
        }
        for &(i, j) in &pairs {
            if i >= j {
                return Err(Error::InvalidArgument(format!(
                    "support pair ({i},{j}) must satisfy i < j"
                )));
            }
            if j >= n_nodes {
                return Err(Error::OutOfRange {
                    index: j,
                    len: n_nodes,
                });
            }
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid distance {v}")));
        }
        Ok(DistanceMatrix {
            n_nodes,
            pairs,
            values,
        })
    }

    /// Full support over all `n(n-1)/2` pairs of a dense symmetric matrix.
    pub fn from_dense(d: ArrayView2<'_, f64>) -> Result<Self> {
        let n = d.nrows();
        if d.ncols() != n {
            return Err(Error::Dimension(format!(
                "{}x{} distance matrix",
                n,
                d.ncols()
            )));
        }
        let pairs: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let values = pairs.iter().map(|&(i, j)| d[[i, j]]).collect();
        Self::new(n, pairs, values)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs
            .iter()
            .zip(&self.values)
            .map(|(&(i, j), &v)| (i, j, v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: f64) -> DistanceMatrix {
        DistanceMatrix {
            n_nodes: self.n_nodes,
            pairs: self.pairs.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Number of support pairs touching each node.
    pub fn support_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(i, j) in &self.pairs {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Drops nodes without any support pair. Returns the compacted matrix and
    /// the map from compacted to original indices.
    pub fn restrict_to_covered(&self) -> (DistanceMatrix, Vec<usize>) {
        let deg = self.support_degrees();
        let map: Vec<usize> = (0..self.n_nodes).filter(|&v| deg[v] > 0).collect();
        let mut new_index = vec![usize::MAX; self.n_nodes];
        for (k, &v) in map.iter().enumerate() {
            new_index[v] = k;
        }
        let pairs = self
            .pairs
            .iter()
            .map(|&(i, j)| (new_index[i], new_index[j]))
            .collect();
        (
            DistanceMatrix {
                n_nodes: map.len(),
                pairs,
                values: self.values.clone(),
            },
            map,
        )
    }
}

fn check_support(n: usize, support: &[(usize, usize)]) -> Result<()> {
    for &(i, j) in support {
        if i >= n || j >= n {
            return Err(Error::OutOfRange {
                index: i.max(j),
                len: n,
            });
        }
    }
    Ok(())
}

/// `‖z_i − z_j‖²` on every support pair.
pub fn embedding_sq_euclidean(
    z: ArrayView2<'_, f64>,
    support: &[(usize, usize)],
) -> Result<DistanceMatrix> {
    check_support(z.nrows(), support)?;
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite embedding entry".into()));
    }
    let values = support
        .iter()
        .map(|&(i, j)| {
            z.row(i)
                .iter()
                .zip(z.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    DistanceMatrix::new(z.nrows(), support.to_vec(), values)
}

/// Fraction of disagreeing predicted labels between the closed neighborhoods
/// `N_i = neighbors(i) ∪ {i}` and `N_j` in the observed graph.
pub fn label_disagreement(
    pred_labels: &[usize],
    g_obs: &WeightedGraph,
    support: &[(usize, usize)],
) -> Result<DistanceMatrix> {
    let n = g_obs.n_nodes();
    if pred_labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {} nodes",
            pred_labels.len(),
            n
        )));
    }
    check_support(n, support)?;
    let adj = g_obs.adjacency_lists();
    // Sparse label histograms of each closed neighborhood.
    let hist: Vec<Vec<(usize, u64)>> = (0..n)
        .map(|i| {
            let mut labels: Vec<usize> = adj[i].iter().map(|&k| pred_labels[k]).collect();
            labels.push(pred_labels[i]);
            labels.sort_unstable();
            let mut h: Vec<(usize, u64)> = Vec::new();
            for c in labels {
                match h.last_mut() {
                    Some((last, cnt)) if *last == c => *cnt += 1,
                    _ => h.push((c, 1)),
                }
            }
            h
        })
        .collect();
    let size: Vec<u64> = adj.iter().map(|a| a.len() as u64 + 1).collect();
    let values = support
        .iter()
        .map(|&(i, j)| {
            let (mut a, mut b) = (0, 0);
            let (hi, hj) = (&hist[i], &hist[j]);
            let mut same = 0u64;
            while a < hi.len() && b < hj.len() {
                match hi[a].0.cmp(&hj[b].0) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        same += hi[a].1 * hj[b].1;
                        a += 1;
                        b += 1;
                    }
                }
            }
            let total = size[i] * size[j];
            (total - same) as f64 / total as f64
        })
        .collect();
    DistanceMatrix::new(n, support.to_vec(), values)
}

/// `D1 + δ·D2`. Without an explicit δ, uses `max(D1) / max(D2)` (zero when
/// `D2` vanishes).
pub fn combine_with_delta(
    d1: &DistanceMatrix,
    d2: &DistanceMatrix,
    delta: Option<f64>,
) -> Result<(DistanceMatrix, f64)> {
    if d1.n_nodes != d2.n_nodes || d1.pairs != d2.pairs {
        return Err(Error::Dimension(
            "combined distances must share a support".into(),
        ));
    }
    let delta_used = match delta {
        Some(d) if d.is_finite() && d >= 0.0 => d,
        Some(d) => return Err(Error::InvalidArgument(format!("delta {d} must be >= 0"))),
        None => {
            let m2 = d2.max();
            if m2 > 0.0 {
                d1.max() / m2
            } else {
                0.0
            }
        }
    };
    let values = d1
        .values
        .iter()
        .zip(&d2.values)
        .map(|(a, b)| a + delta_used * b)
        .collect();
    Ok((
        DistanceMatrix {
            n_nodes: d1.n_nodes,
            pairs: d1.pairs.clone(),
            values,
        },
        delta_used,
    ))
}

/// Cosine distance `1 − cos(e_u, e_i)` on user–item pairs, clamped to `[0, 2]`.
///
/// The result lives on the joint node set: user `u` is node `u`, item `i` is
/// node `n_users + i`.
pub fn cosine_bipartite(
    e_users: ArrayView2<'_, f64>,
    e_items: ArrayView2<'_, f64>,
    support: &[(usize, usize)],
) -> Result<DistanceMatrix> {
    if e_users.ncols() != e_items.ncols() {
        return Err(Error::Dimension(format!(
            "user dim {} vs item dim {}",
            e_users.ncols(),
            e_items.ncols()
        )));
    }
    let (nu, ni) = (e_users.nrows(), e_items.nrows());
    let norm = |row: ndarray::ArrayView1<'_, f64>| row.dot(&row).sqrt();
    let user_norm: Vec<f64> = e_users.rows().into_iter().map(norm).collect();
    let item_norm: Vec<f64> = e_items.rows().into_iter().map(norm).collect();
    let mut pairs = Vec::with_capacity(support.len());
    let mut values = Vec::with_capacity(support.len());
    for &(u, i) in support {
        if u >= nu {
            return Err(Error::OutOfRange { index: u, len: nu });
        }
        if i >= ni {
            return Err(Error::OutOfRange { index: i, len: ni });
        }
        if user_norm[u] == 0.0 {
            return Err(Error::ZeroNorm {
                kind: "user",
                index: u,
            });
        }
        if item_norm[i] == 0.0 {
            return Err(Error::ZeroNorm {
                kind: "item",
                index: i,
            });
        }
        let cos = e_users.row(u).dot(&e_items.row(i)) / (user_norm[u] * item_norm[i]);
        pairs.push((u, nu + i));
        values.push((1.0 - cos).clamp(0.0, 2.0));
    }
    DistanceMatrix::new(nu + ni, pairs, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sq_euclidean_hand_cases() {
        let z = array![[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]];
        let d = embedding_sq_euclidean(z.view(), &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(d.values(), &[25.0, 0.0]);
        assert!(embedding_sq_euclidean(z.view(), &[(0, 3)]).is_err());
    }

    #[test]
    fn label_disagreement_half() {
        // N_0 = {0, 1} with labels {1, 1}; N_2 = {2, 3} with labels {1, 2}.
        let g = WeightedGraph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let d = label_disagreement(&[1, 1, 1, 2], &g, &[(0, 2)]).unwrap();
        assert_eq!(d.values(), &[0.5]);
        let same = label_disagreement(&[0, 0, 0, 0], &g, &[(0, 2), (1, 3)]).unwrap();
        assert!(same.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_default_and_zero() {
        let d1 = DistanceMatrix::new(3, vec![(0, 1), (1, 2)], vec![10.0, 4.0]).unwrap();
        let d2 = DistanceMatrix::new(3, vec![(0, 1), (1, 2)], vec![0.5, 0.25]).unwrap();
        let (c, delta) = combine_with_delta(&d1, &d2, None).unwrap();
        assert_eq!(delta, 20.0);
        assert_eq!(c.values(), &[20.0, 9.0]);
        let (c0, _) = combine_with_delta(&d1, &d2, Some(0.0)).unwrap();
        assert_eq!(c0, d1);
        let zero = DistanceMatrix::new(3, vec![(0, 1), (1, 2)], vec![0.0, 0.0]).unwrap();
        assert_eq!(combine_with_delta(&d1, &zero, None).unwrap().1, 0.0);
        let other = DistanceMatrix::new(3, vec![(0, 2)], vec![1.0]).unwrap();
        assert!(combine_with_delta(&d1, &other, None).is_err());
    }

    #[test]
    fn cosine_extremes() {
        let eu = array![[1.0, 0.0], [0.0, 0.0]];
        let ei = array![[1.0, 0.0], [-1.0, 0.0]];
        let d = cosine_bipartite(eu.view(), ei.view(), &[(0, 0), (0, 1)]).unwrap();
        assert_eq!(d.pairs(), &[(0, 2), (0, 3)]);
        assert!(d.values()[0].abs() < 1e-15);
        assert!((d.values()[1] - 2.0).abs() < 1e-15);
        let err = cosine_bipartite(eu.view(), ei.view(), &[(1, 0)]).unwrap_err();
        assert!(matches!(
            err,
            Error::ZeroNorm {
                kind: "user",
                index: 1
            }
        ));
    }

    #[test]
    fn restrict_drops_uncovered_nodes() {
        let d = DistanceMatrix::new(5, vec![(1, 3), (3, 4)], vec![1.0, 2.0]).unwrap();
        let (r, map) = d.restrict_to_covered();
        assert_eq!(map, vec![1, 3, 4]);
        assert_eq!(r.pairs(), &[(0, 1), (1, 2)]);
    }
}
