//! Identity-preserving graph containers and the structural transforms shared
//! by every pipeline.
//!
//! Node indices are never permuted: operations that drop nodes (the largest
//! connected component) return an explicit index map back to the original ids.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Set of unordered node pairs, stored canonically with `i < j`.
pub type PairSet = HashSet<(usize, usize)>;

/// Canonical (smaller, larger) ordering of an unordered pair.
#[inline]
pub fn pair(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Sparse symmetric nonnegative adjacency with a zero diagonal.
///
/// Each unordered pair is stored once as `(i, j, w)` with `i < j`, sorted
/// lexicographically. Zero weights are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out = Vec::new();
        for (i, j, w) in edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::OutOfRange {
                    index: i.max(j),
                    len: n_nodes,
                });
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i},{j}) has invalid weight {w}"
                )));
            }
            if w > 0.0 {
                let (a, b) = pair(i, j);
                out.push((a, b, w));
            }
        }
        out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(win) = out
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate edge ({},{})",
                win[0].0, win[0].1
            )));
        }
        Ok(WeightedGraph {
            n_nodes,
            edges: out,
        })
    }

    /// Unweighted graph from a pair list; duplicates and orientation are merged.
    pub fn from_pairs(
        n_nodes: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let set: BTreeSet<(usize, usize)> = pairs.into_iter().map(|(i, j)| pair(i, j)).collect();
        Self::new(n_nodes, set.into_iter().map(|(i, j)| (i, j, 1.0)))
    }

    pub fn empty(n_nodes: usize) -> Self {
        WeightedGraph {
            n_nodes,
            edges: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = pair(i, j);
        match self.edges.binary_search_by(|e| (e.0, e.1).cmp(&key)) {
            Ok(k) => self.edges[k].2,
            Err(_) => 0.0,
        }
    }

    pub fn pair_set(&self) -> PairSet {
        self.edges.iter().map(|&(i, j, _)| (i, j)).collect()
    }

    /// Neighbor lists, each sorted ascending.
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j, _) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Weighted degree of every node.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_nodes];
        for &(i, j, w) in &self.edges {
            deg[i] += w;
            deg[j] += w;
        }
        deg
    }

    /// Density over all unordered pairs.
    pub fn density(&self) -> f64 {
        if self.n_nodes < 2 {
            return 0.0;
        }
        let n = self.n_nodes as f64;
        self.edges.len() as f64 / (n * (n - 1.0) / 2.0)
    }

    pub fn union_max(&self, other: &WeightedGraph) -> Result<WeightedGraph> {
        if self.n_nodes != other.n_nodes {
            return Err(Error::Dimension(format!(
                "union of graphs with {} and {} nodes",
                self.n_nodes, other.n_nodes
            )));
        }
        let mut merged: std::collections::BTreeMap<(usize, usize), f64> = Default::default();
        for &(i, j, w) in self.edges.iter().chain(other.edges.iter()) {
            let e = merged.entry((i, j)).or_insert(0.0);
            *e = e.max(w);
        }
        WeightedGraph::new(
            self.n_nodes,
            merged.into_iter().map(|((i, j), w)| (i, j, w)),
        )
    }

    /// Keeps the `m` heaviest edges with weight 1 (ties by pair order).
    pub fn top_m_binarized(&self, m: usize) -> WeightedGraph {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (&self.edges[a], &self.edges[b]);
            eb.2.total_cmp(&ea.2).then((ea.0, ea.1).cmp(&(eb.0, eb.1)))
        });
        let mut kept: Vec<_> = order
            .into_iter()
            .take(m)
            .map(|k| (self.edges[k].0, self.edges[k].1, 1.0))
            .collect();
        kept.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        WeightedGraph {
            n_nodes: self.n_nodes,
            edges: kept,
        }
    }

    /// Edge list text: a `#nodes=N` header and one `i<TAB>j<TAB>w` line per edge.
    pub fn to_edge_list_string(&self) -> String {
        let mut s = format!("#nodes={}\n", self.n_nodes);
        for &(i, j, w) in &self.edges {
            let _ = writeln!(s, "{i}\t{j}\t{w}");
        }
        s
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_edge_list_string().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_edge_list(path: &Path) -> Result<WeightedGraph> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(BufReader::new(f), path)
    }

    pub fn parse_edge_list(reader: impl BufRead, path: &Path) -> Result<WeightedGraph> {
        let mut n_nodes = None;
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("#nodes=") {
                let n = rest
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
                n_nodes = Some(n);
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let mut next = |what: &str| {
                fields
                    .next()
                    .ok_or_else(|| Error::parse(path, lineno + 1, format!("missing {what}")))
            };
            let i = next("i")?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
            let j = next("j")?
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
            let w = next("w")?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?;
            edges.push((i, j, w));
        }
        let n = n_nodes.ok_or_else(|| Error::parse(path, 1, "missing #nodes= header"))?;
        WeightedGraph::new(n, edges)
    }
}

/// User–item interaction graph. Users and items have separate index spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    n_users: usize,
    n_items: usize,
    interactions: Vec<(usize, usize, f64)>,
}

impl BipartiteGraph {
    pub fn new(
        n_users: usize,
        n_items: usize,
        interactions: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out: Vec<(usize, usize, f64)> = Vec::new();
        for (u, i, w) in interactions {
            if u >= n_users {
                return Err(Error::OutOfRange {
                    index: u,
                    len: n_users,
                });
            }
            if i >= n_items {
                return Err(Error::OutOfRange {
                    index: i,
                    len: n_items,
                });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "interaction ({u},{i}) has invalid weight {w}"
                )));
            }
            if w > 0.0 {
                out.push((u, i, w));
            }
        }
        out.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(win) = out
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(Error::InvalidArgument(format!(
                "duplicate interaction ({},{})",
                win[0].0, win[0].1
            )));
        }
        Ok(BipartiteGraph {
            n_users,
            n_items,
            interactions: out,
        })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn interactions(&self) -> &[(usize, usize, f64)] {
        &self.interactions
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.interactions
            .binary_search_by(|e| (e.0, e.1).cmp(&(u, i)))
            .is_ok()
    }

    pub fn pair_set(&self) -> HashSet<(usize, usize)> {
        self.interactions.iter().map(|&(u, i, _)| (u, i)).collect()
    }

    /// Items of every user, sorted.
    pub fn user_items(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_users];
        for &(u, i, _) in &self.interactions {
            out[u].push(i);
        }
        out
    }

    pub fn item_users(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_items];
        for &(u, i, _) in &self.interactions {
            out[i].push(u);
        }
        out
    }

    /// Interactions with all weights set to one.
    pub fn unweighted(&self) -> BipartiteGraph {
        BipartiteGraph {
            n_users: self.n_users,
            n_items: self.n_items,
            interactions: self
                .interactions
                .iter()
                .map(|&(u, i, _)| (u, i, 1.0))
                .collect(),
        }
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}`, the renormalized GCN propagation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    pub fn n_nodes(&self) -> usize {
        self.matrix.n_rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

impl std::ops::Deref for NormalizedAdjacency {
    type Target = CsrMatrix;

    fn deref(&self) -> &CsrMatrix {
        &self.matrix
    }
}

pub fn normalize_adjacency(g: &WeightedGraph) -> NormalizedAdjacency {
    let n = g.n_nodes();
    let mut deg = g.degrees();
    for d in &mut deg {
        *d += 1.0;
    }
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut triplets = Vec::with_capacity(n + 2 * g.n_edges());
    for (i, s) in inv_sqrt.iter().enumerate() {
        triplets.push((i, i, s * s));
    }
    for &(i, j, w) in g.edges() {
        let v = w * inv_sqrt[i] * inv_sqrt[j];
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    NormalizedAdjacency {
        matrix: CsrMatrix::from_triplets(n, n, &triplets),
    }
}

/// Largest connected component and the map from new indices to original ids.
///
/// Components of equal size are ranked by their smallest original index.
pub fn largest_connected_component(g: &WeightedGraph) -> Result<(WeightedGraph, Vec<usize>)> {
    let n = g.n_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let adj = g.adjacency_lists();
    let mut comp = vec![usize::MAX; n];
    let mut best: Option<(usize, usize)> = None; // (component id, size)
    let mut n_comp = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let id = n_comp;
        n_comp += 1;
        comp[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &u in &adj[v] {
                if comp[u] == usize::MAX {
                    comp[u] = id;
                    queue.push_back(u);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((id, size));
        }
    }
    let (keep, _) = best.expect("n > 0");
    let map: Vec<usize> = (0..n).filter(|&v| comp[v] == keep).collect();
    let mut new_index = vec![usize::MAX; n];
    for (k, &v) in map.iter().enumerate() {
        new_index[v] = k;
    }
    let edges = g
        .edges()
        .iter()
        .filter(|e| comp[e.0] == keep)
        .map(|&(i, j, w)| (new_index[i], new_index[j], w));
    Ok((WeightedGraph::new(map.len(), edges)?, map))
}

/// Replaces the unobserved entries of `observed` with those of `learned`.
///
/// Pairs in `observed_mask` take the observed weight (zero if the observed
/// status was a non-link); every other pair takes the learned weight.
pub fn graft(
    learned: &WeightedGraph,
    observed: &WeightedGraph,
    observed_mask: &PairSet,
) -> Result<WeightedGraph> {
    if learned.n_nodes() != observed.n_nodes() {
        return Err(Error::Dimension(format!(
            "graft of graphs with {} and {} nodes",
            learned.n_nodes(),
            observed.n_nodes()
        )));
    }
    let mut out = Vec::with_capacity(learned.n_edges() + observed.n_edges());
    for &(i, j, w) in observed.edges() {
        if observed_mask.contains(&(i, j)) {
            out.push((i, j, w));
        }
    }
    for &(i, j, w) in learned.edges() {
        if !observed_mask.contains(&(i, j)) {
            out.push((i, j, w));
        }
    }
    WeightedGraph::new(observed.n_nodes(), out)
}

/// The pool of assumed-negative user–item pairs: every pair absent from the
/// observed graph, minus an explicit removed set.
#[derive(Debug, Clone)]
pub struct NegativePool {
    n_users: usize,
    n_items: usize,
    observed: HashSet<(usize, usize)>,
    removed: HashSet<(usize, usize)>,
    removed_order: Vec<(usize, usize)>,
}

impl NegativePool {
    /// Full pool implied by `observed`.
    pub fn from_observed(observed: &BipartiteGraph) -> Self {
        NegativePool {
            n_users: observed.n_users(),
            n_items: observed.n_items(),
            observed: observed.pair_set(),
            removed: HashSet::new(),
            removed_order: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.n_users * self.n_items - self.observed.len() - self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        u < self.n_users
            && i < self.n_items
            && !self.observed.contains(&(u, i))
            && !self.removed.contains(&(u, i))
    }

    /// Pairs removed from the full pool, heaviest learned weight first.
    pub fn removed(&self) -> &[(usize, usize)] {
        &self.removed_order
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_users)
            .flat_map(move |u| (0..self.n_items).map(move |i| (u, i)))
            .filter(move |&(u, i)| self.contains(u, i))
    }
}

/// Removes the `⌊fraction · |learned|⌋` heaviest learned pairs from the
/// negative pool of `observed`. Ties are broken by `(user, item)` order.
pub fn refine_negative_pool(
    learned: &BipartiteGraph,
    observed: &BipartiteGraph,
    fraction: f64,
) -> Result<NegativePool> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    if learned.n_users() != observed.n_users() || learned.n_items() != observed.n_items() {
        return Err(Error::Dimension(format!(
            "learned graph is {}x{}, observed is {}x{}",
            learned.n_users(),
            learned.n_items(),
            observed.n_users(),
            observed.n_items()
        )));
    }
    let mut pool = NegativePool::from_observed(observed);
    if let Some(&(u, i, _)) = learned
        .interactions()
        .iter()
        .find(|&&(u, i, _)| pool.observed.contains(&(u, i)))
    {
        return Err(Error::InvalidArgument(format!(
            "learned edge ({u},{i}) is an observed interaction"
        )));
    }
    let count = (fraction * learned.n_interactions() as f64).floor() as usize;
    let mut ranked: Vec<&(usize, usize, f64)> = learned.interactions().iter().collect();
    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
    for &&(u, i, _) in ranked.iter().take(count) {
        pool.removed.insert((u, i));
        pool.removed_order.push((u, i));
    }
    Ok(pool)
}
