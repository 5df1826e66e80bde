//! Hierarchical navigable small world index over squared Euclidean distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sq_dist;

#[derive(Debug, Clone)]
pub struct HnswParams {
    /// Links per node on upper layers; layer 0 keeps twice as many.
    pub m: usize,
    pub ef_construction: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 16,
            ef_construction: 100,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    dist: f64,
    id: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub struct Hnsw<'a> {
    data: &'a [f64],
    dim: usize,
    m: usize,
    /// links[node][layer]
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    top_layer: usize,
    visited: Vec<u32>,
    stamp: u32,
}

impl<'a> Hnsw<'a> {
    /// Builds the index by inserting rows of `data` (row-major, `dim` columns)
    /// in order.
    pub fn build(data: &'a [f64], dim: usize, params: &HnswParams) -> Self {
        let n = data.len() / dim;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let ml = 1.0 / (params.m.max(2) as f64).ln();
        let mut index = Hnsw {
            data,
            dim,
            m: params.m.max(2),
            links: Vec::with_capacity(n),
            entry: 0,
            top_layer: 0,
            visited: vec![0; n],
            stamp: 0,
        };
        for id in 0..n {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            let level = (-u.ln() * ml).floor() as usize;
            index.insert(id as u32, level, params.ef_construction.max(index.m));
        }
        index
    }

    fn point(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    fn insert(&mut self, id: u32, level: usize, ef_construction: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if id == 0 {
            self.entry = 0;
            self.top_layer = level;
            return;
        }
        let q: Vec<f64> = self.point(id).to_vec();
        let mut ep = Cand {
            dist: sq_dist(&q, self.point(self.entry)),
            id: self.entry,
        };
        for layer in (level + 1..=self.top_layer).rev() {
            ep = self.greedy(&q, ep, layer);
        }
        let mut eps = vec![ep];
        for layer in (0..=level.min(self.top_layer)).rev() {
            let found = self.search_layer(&q, &eps, ef_construction, layer);
            let chosen = self.select_heuristic(&found, self.m);
            self.links[id as usize][layer] = chosen.iter().map(|c| c.id).collect();
            for c in &chosen {
                self.link_back(c.id, id, layer);
            }
            eps = found;
        }
        if level > self.top_layer {
            self.top_layer = level;
            self.entry = id;
        }
    }

    fn link_back(&mut self, from: u32, to: u32, layer: usize) {
        let cap = self.max_links(layer);
        self.links[from as usize][layer].push(to);
        if self.links[from as usize][layer].len() > cap {
            let base = self.point(from).to_vec();
            let cands: Vec<Cand> = self.links[from as usize][layer]
                .iter()
                .map(|&nb| Cand {
                    dist: sq_dist(&base, self.point(nb)),
                    id: nb,
                })
                .collect();
            let mut sorted = cands;
            sorted.sort();
            let kept = self.select_heuristic(&sorted, cap);
            self.links[from as usize][layer] = kept.iter().map(|c| c.id).collect();
        }
    }

    /// Neighbor selection heuristic: keep a candidate only if it is closer to
    /// the base than to every already-kept neighbor, then back-fill with the
    /// nearest discarded ones. `cands` must be sorted by distance.
    fn select_heuristic(&self, cands: &[Cand], m: usize) -> Vec<Cand> {
        let mut kept: Vec<Cand> = Vec::with_capacity(m);
        let mut skipped = Vec::new();
        for &c in cands {
            if kept.len() >= m {
                break;
            }
            let p = self.point(c.id);
            if kept.iter().all(|k| sq_dist(p, self.point(k.id)) > c.dist) {
                kept.push(c);
            } else {
                skipped.push(c);
            }
        }
        for c in skipped {
            if kept.len() >= m {
                break;
            }
            kept.push(c);
        }
        kept
    }

    fn greedy(&self, q: &[f64], mut cur: Cand, layer: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in &self.links[cur.id as usize][layer] {
                let d = sq_dist(q, self.point(nb));
                if d < cur.dist || (d == cur.dist && nb < cur.id) {
                    cur = Cand { dist: d, id: nb };
                    improved = true;
                }
            }
            if !improved {
                return cur;
            }
        }
    }

    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.visited.iter_mut().for_each(|v| *v = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    /// Beam search on one layer; returns up to `ef` candidates sorted by distance.
    fn search_layer(&mut self, q: &[f64], eps: &[Cand], ef: usize, layer: usize) -> Vec<Cand> {
        let stamp = self.next_stamp();
        let mut frontier: BinaryHeap<std::cmp::Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        for &e in eps {
            if self.visited[e.id as usize] != stamp {
                self.visited[e.id as usize] = stamp;
                frontier.push(std::cmp::Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(std::cmp::Reverse(c)) = frontier.pop() {
            let worst = best.peek().map_or(f64::INFINITY, |w| w.dist);
            if c.dist > worst && best.len() >= ef {
                break;
            }
            for k in 0..self.links[c.id as usize][layer].len() {
                let nb = self.links[c.id as usize][layer][k];
                if self.visited[nb as usize] == stamp {
                    continue;
                }
                self.visited[nb as usize] = stamp;
                let d = sq_dist(q, self.point(nb));
                let worst = best.peek().map_or(f64::INFINITY, |w| w.dist);
                if best.len() < ef || d < worst {
                    let cand = Cand { dist: d, id: nb };
                    frontier.push(std::cmp::Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    /// A reusable query handle; keeps one visited buffer across searches.
    pub fn searcher(&self) -> Searcher<'_, 'a> {
        Searcher {
            index: self,
            visited: vec![0; self.links.len()],
            stamp: 0,
        }
    }

    /// Indices of (approximately) the `k` nearest stored points to `q`.
    pub fn search(&self, q: &[f64], k: usize, ef: usize) -> Vec<usize> {
        self.searcher().search(q, k, ef)
    }

    fn search_with(
        &self,
        q: &[f64],
        k: usize,
        ef: usize,
        scratch: &mut Searcher<'_, '_>,
    ) -> Vec<usize> {
        if self.links.is_empty() {
            return Vec::new();
        }
        let mut ep = Cand {
            dist: sq_dist(q, self.point(self.entry)),
            id: self.entry,
        };
        for layer in (1..=self.top_layer).rev() {
            ep = self.greedy(q, ep, layer);
        }
        scratch.stamp = scratch.stamp.wrapping_add(1);
        if scratch.stamp == 0 {
            scratch.visited.iter_mut().for_each(|v| *v = 0);
            scratch.stamp = 1;
        }
        let stamp = scratch.stamp;
        let visited = &mut scratch.visited;
        let ef = ef.max(k);
        let mut frontier: BinaryHeap<std::cmp::Reverse<Cand>> = BinaryHeap::new();
        let mut best: BinaryHeap<Cand> = BinaryHeap::new();
        visited[ep.id as usize] = stamp;
        frontier.push(std::cmp::Reverse(ep));
        best.push(ep);
        while let Some(std::cmp::Reverse(c)) = frontier.pop() {
            let worst = best.peek().map_or(f64::INFINITY, |w| w.dist);
            if c.dist > worst && best.len() >= ef {
                break;
            }
            for &nb in &self.links[c.id as usize][0] {
                if visited[nb as usize] == stamp {
                    continue;
                }
                visited[nb as usize] = stamp;
                let d = sq_dist(q, self.point(nb));
                let worst = best.peek().map_or(f64::INFINITY, |w| w.dist);
                if best.len() < ef || d < worst {
                    let cand = Cand { dist: d, id: nb };
                    frontier.push(std::cmp::Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
            .into_iter()
            .take(k)
            .map(|c| c.id as usize)
            .collect()
    }
}

pub struct Searcher<'s, 'a> {
    index: &'s Hnsw<'a>,
    visited: Vec<u32>,
    stamp: u32,
}

impl Searcher<'_, '_> {
    pub fn search(&mut self, q: &[f64], k: usize, ef: usize) -> Vec<usize> {
        let index = self.index;
        index.search_with(q, k, ef, self)
    }
}
