//! Candidate edge supports for the graph solver.
//!
//! [`exact_knn`] is the quality reference; [`approx_knn`] goes through a
//! hierarchical navigable-small-world index so support construction stays
//! near `O(N log N)`.

mod hnsw;

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::pair;

pub use hnsw::{Hnsw, HnswParams, Searcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportMethod {
    Exact,
    Approximate,
}

/// Symmetrized k-NN pairs, stored once per unordered pair (`i < j`), sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub pairs: Vec<(usize, usize)>,
    pub k_requested: usize,
    pub method: SupportMethod,
    /// Recall of the per-node neighbor lists against exact search, estimated
    /// on a sample of query nodes. `None` for exact supports.
    pub recall_estimate: Option<f64>,
}

impl SupportSet {
    fn from_lists(lists: &[Vec<usize>], k: usize, method: SupportMethod) -> Self {
        let mut pairs: Vec<(usize, usize)> = lists
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |&j| pair(i, j)))
            .collect();
        pairs.sort_unstable();
        pairs.dedup();
        SupportSet {
            pairs,
            k_requested: k,
            method,
            recall_estimate: None,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must satisfy 0 < k < n = {n}"
        )));
    }
    Ok(())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` smallest entries of `(distance, index)` candidates, ties by index.
fn k_smallest(mut cands: Vec<(f64, usize)>, k: usize) -> Vec<usize> {
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if cands.len() > k {
        cands.select_nth_unstable_by(k - 1, cmp);
        cands.truncate(k);
    }
    cands.sort_by(cmp);
    cands.into_iter().map(|(_, j)| j).collect()
}

/// Exact k-NN lists under a caller-supplied dissimilarity.
pub fn exact_knn_lists_by<F>(n: usize, k: usize, dist: F) -> Result<Vec<Vec<usize>>>
where
    F: Fn(usize, usize) -> f64,
{
    check_k(k, n)?;
    Ok((0..n)
        .map(|i| {
            let cands = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(i, j), j))
                .collect();
            k_smallest(cands, k)
        })
        .collect())
}

/// Exact k-NN support under a caller-supplied dissimilarity.
pub fn exact_knn_by<F>(n: usize, k: usize, dist: F) -> Result<SupportSet>
where
    F: Fn(usize, usize) -> f64,
{
    let lists = exact_knn_lists_by(n, k, dist)?;
    Ok(SupportSet::from_lists(&lists, k, SupportMethod::Exact))
}

/// Exact k-NN support of points under squared Euclidean distance.
pub fn exact_knn(points: ArrayView2<'_, f64>, k: usize) -> Result<SupportSet> {
    let rows = contiguous_rows(points);
    let d = points.ncols();
    exact_knn_by(points.nrows(), k, |i, j| {
        sq_dist(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d])
    })
}

fn contiguous_rows(points: ArrayView2<'_, f64>) -> Vec<f64> {
    points.iter().copied().collect()
}

/// Below this many points the index is skipped and exact search is used.
pub const EXACT_FALLBACK_MAX: usize = 64;

/// Default search breadth for [`approx_knn`].
pub const DEFAULT_EF: usize = 64;

/// Number of query nodes sampled to estimate recall of an approximate support.
const RECALL_SAMPLE: usize = 200;

/// Approximate k-NN support through an HNSW index.
pub fn approx_knn(points: ArrayView2<'_, f64>, k: usize, ef: usize) -> Result<SupportSet> {
    approx_knn_with(points, k, ef, &HnswParams::default())
}

pub fn approx_knn_with(
    points: ArrayView2<'_, f64>,
    k: usize,
    ef: usize,
    params: &HnswParams,
) -> Result<SupportSet> {
    let n = points.nrows();
    check_k(k, n)?;
    if n <= EXACT_FALLBACK_MAX {
        return exact_knn(points, k);
    }
    let rows = contiguous_rows(points);
    let dim = points.ncols();
    let index = Hnsw::build(&rows, dim, params);
    let ef = ef.max(k + 1);
    let mut searcher = index.searcher();
    let lists: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            searcher
                .search(&rows[i * dim..(i + 1) * dim], k + 1, ef)
                .into_iter()
                .filter(|&j| j != i)
                .take(k)
                .collect()
        })
        .collect();

    // Recall estimate on a sample of queries.
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9);
    let probes = sample(&mut rng, n, RECALL_SAMPLE.min(n)).into_vec();
    let mut hits = 0usize;
    for &i in &probes {
        let q = &rows[i * dim..(i + 1) * dim];
        let cands = (0..n)
            .filter(|&j| j != i)
            .map(|j| (sq_dist(q, &rows[j * dim..(j + 1) * dim]), j))
            .collect();
        let truth = k_smallest(cands, k);
        hits += truth.iter().filter(|t| lists[i].contains(t)).count();
    }
    let mut support = SupportSet::from_lists(&lists, k, SupportMethod::Approximate);
    support.recall_estimate = Some(hits as f64 / (probes.len() * k) as f64);
    Ok(support)
}

/// Per-user top-`k` items by a caller-supplied dissimilarity, skipping pairs
/// for which `exclude(u, i)` holds. Returns `(user, item)` pairs.
pub fn bipartite_top_k<D, X>(
    n_users: usize,
    n_items: usize,
    k: usize,
    dist: D,
    exclude: X,
) -> Vec<(usize, usize)>
where
    D: Fn(usize, usize) -> f64,
    X: Fn(usize, usize) -> bool,
{
    let mut out = Vec::new();
    for u in 0..n_users {
        let cands: Vec<(f64, usize)> = (0..n_items)
            .filter(|&i| !exclude(u, i))
            .map(|i| (dist(u, i), i))
            .collect();
        if cands.is_empty() {
            continue;
        }
        let take = k.min(cands.len());
        let mut items = k_smallest(cands, take);
        items.sort_unstable();
        out.extend(items.into_iter().map(|i| (u, i)));
    }
    out
}

/// Fraction of exact-support pairs also present in `approx`.
pub fn support_recall(approx: &SupportSet, exact: &SupportSet) -> f64 {
    if exact.pairs.is_empty() {
        return 1.0;
    }
    let hits = exact
        .pairs
        .iter()
        .filter(|p| approx.pairs.binary_search(p).is_ok())
        .count();
    hits as f64 / exact.pairs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn collinear_points() {
        let pts = array![[0.0], [1.0], [3.0]];
        let s = exact_knn(pts.view(), 1).unwrap();
        assert_eq!(s.pairs, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn complete_support_at_k_n_minus_one() {
        let pts = array![[0.0, 1.0], [2.0, 0.5], [3.0, 3.0], [-1.0, 0.0], [0.3, 0.3]];
        let s = exact_knn(pts.view(), 4).unwrap();
        assert_eq!(s.len(), 10);
    }

    #[test]
    fn invalid_k() {
        let pts = array![[0.0], [1.0]];
        assert!(exact_knn(pts.view(), 0).is_err());
        assert!(exact_knn(pts.view(), 2).is_err());
        assert!(approx_knn(pts.view(), 2, 10).is_err());
    }

    #[test]
    fn ties_break_by_index() {
        let pts = array![[0.0f64], [1.0], [-1.0]];
        let lists = exact_knn_lists_by(3, 1, |i, j| (pts[[i, 0]] - pts[[j, 0]]).powi(2)).unwrap();
        assert_eq!(lists[0], vec![1]);
    }

    #[test]
    fn bipartite_skips_excluded() {
        let top = bipartite_top_k(2, 3, 2, |u, i| (u + i) as f64, |u, i| u == 0 && i == 0);
        assert_eq!(top, vec![(0, 1), (0, 2), (1, 0), (1, 1)]);
    }
}
