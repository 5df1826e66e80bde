//! Bayesian personalized ranking with a one-layer normalized propagation
//! embedder.

use std::collections::HashSet;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Adam, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, NegativePool};
use crate::metrics::{ndcg_at_k, recall_at_k};
use crate::real::Real;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct BprParams<F: Real> {
    /// `[n_users × d]`
    pub e_users: Array2<F>,
    /// `[n_items × d]`
    pub e_items: Array2<F>,
    /// Prior precision of the Gaussian prior on both tables.
    pub lambda: f64,
}

impl<F: Real> BprParams<F> {
    pub fn random(
        n_users: usize,
        n_items: usize,
        dim: usize,
        lambda: f64,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut draw = |rows| {
            Array2::from_shape_simple_fn((rows, dim), || {
                F::of(0.1 * rng.sample::<f64, _>(StandardNormal))
            })
        };
        let e_users = draw(n_users);
        let e_items = draw(n_items);
        BprParams {
            e_users,
            e_items,
            lambda,
        }
    }
}

impl<F: Real> Params<F> for BprParams<F> {
    fn tensors(&self) -> Vec<&Array2<F>> {
        vec![&self.e_users, &self.e_items]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Array2<F>> {
        vec![&mut self.e_users, &mut self.e_items]
    }
    fn names(&self) -> Vec<&'static str> {
        vec!["e_users", "e_items"]
    }
}

/// Degree-normalized user–item adjacency, `Ā_ui = 1/sqrt(deg_u · deg_i)`.
#[derive(Debug, Clone)]
pub struct PropagationGraph {
    ui: CsrMatrix,
}

impl PropagationGraph {
    pub fn new(g: &BipartiteGraph) -> Self {
        let mut du = vec![0usize; g.n_users()];
        let mut di = vec![0usize; g.n_items()];
        for &(u, i, _) in g.interactions() {
            du[u] += 1;
            di[i] += 1;
        }
        let triplets: Vec<(usize, usize, f64)> = g
            .interactions()
            .iter()
            .map(|&(u, i, _)| (u, i, 1.0 / ((du[u] * di[i]) as f64).sqrt()))
            .collect();
        PropagationGraph {
            ui: CsrMatrix::from_triplets(g.n_users(), g.n_items(), &triplets),
        }
    }

    pub fn n_users(&self) -> usize {
        self.ui.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.ui.n_cols()
    }
}

struct Propagated<F: Real> {
    users: Array2<F>,
    items: Array2<F>,
    norm_users: Vec<F>,
    norm_items: Vec<F>,
}

/// Rows divided by their norms; zero rows stay zero.
fn normalize_rows<F: Real>(mut m: Array2<F>) -> (Array2<F>, Vec<F>) {
    let mut norms = Vec::with_capacity(m.nrows());
    for mut row in m.axis_iter_mut(Axis(0)) {
        let r = row
            .iter()
            .map(|&v| v * v)
            .fold(F::zero(), |a, b| a + b)
            .sqrt();
        if r > F::zero() {
            row.mapv_inplace(|v| v / r);
        }
        norms.push(r);
    }
    (m, norms)
}

fn propagate<F: Real>(p: &BprParams<F>, g: &PropagationGraph) -> Result<Propagated<F>> {
    if p.e_users.nrows() != g.n_users() || p.e_items.nrows() != g.n_items() {
        return Err(Error::Dimension(format!(
            "tables {}x{} for graph {}x{}",
            p.e_users.nrows(),
            p.e_items.nrows(),
            g.n_users(),
            g.n_items()
        )));
    }
    let pu = &p.e_users + &g.ui.spmm(p.e_items.view());
    let pi = &p.e_items + &g.ui.spmm_t(p.e_users.view());
    let (users, norm_users) = normalize_rows(pu);
    let (items, norm_items) = normalize_rows(pi);
    Ok(Propagated {
        users,
        items,
        norm_users,
        norm_items,
    })
}

/// Graph-dependent embeddings `normalize(E + Ā·E_other)` for users and items.
pub fn bpr_embed_forward<F: Real>(
    p: &BprParams<F>,
    g: &BipartiteGraph,
) -> Result<(Array2<F>, Array2<F>)> {
    propagate(p, &PropagationGraph::new(g)).map(|o| (o.users, o.items))
}

fn propagated_forward<F: Real>(
    p: &BprParams<F>,
    g: &PropagationGraph,
) -> Result<(Array2<F>, Array2<F>)> {
    propagate(p, g).map(|o| (o.users, o.items))
}

/// Backpropagates through the row normalization: `dp = (de − e·(e·de)) / ‖p‖`.
fn normalize_backward<F: Real>(e: &Array2<F>, norms: &[F], de: &mut Array2<F>) {
    for ((mut g, row), &r) in de
        .axis_iter_mut(Axis(0))
        .zip(e.axis_iter(Axis(0)))
        .zip(norms)
    {
        if r <= F::zero() {
            g.fill(F::zero());
            continue;
        }
        let dot = g
            .iter()
            .zip(row.iter())
            .fold(F::zero(), |a, (&x, &y)| a + x * y);
        ndarray::Zip::from(&mut g)
            .and(&row)
            .for_each(|x, &y| *x = (*x - y * dot) / r);
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// BPR loss `−Σ log σ(τ·(e_u·e_i − e_u·e_j)) + (λ/2)‖params‖²` over
/// `(u, i, j)` triples, with exact gradients.
///
/// With `graph = None` the raw embedding tables are scored; otherwise scores
/// use the propagated embeddings and gradients flow through the propagation.
pub fn bpr_loss_grad<F: Real>(
    p: &BprParams<F>,
    graph: Option<&PropagationGraph>,
    triples: &[(usize, usize, usize)],
    score_scale: f64,
) -> Result<(F, BprParams<F>)> {
    if triples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let (nu, ni) = (p.e_users.nrows(), p.e_items.nrows());
    for &(u, i, j) in triples {
        if u >= nu {
            return Err(Error::OutOfRange { index: u, len: nu });
        }
        if i >= ni || j >= ni {
            return Err(Error::OutOfRange {
                index: i.max(j),
                len: ni,
            });
        }
    }
    let prop = match graph {
        Some(g) => Some(propagate(p, g)?),
        None => None,
    };
    let (eu, ei) = match &prop {
        Some(o) => (&o.users, &o.items),
        None => (&p.e_users, &p.e_items),
    };
    let tau = F::of(score_scale);
    let mut gu = Array2::<F>::zeros(eu.raw_dim());
    let mut gi = Array2::<F>::zeros(ei.raw_dim());
    let mut loss = 0.0f64;
    for &(u, i, j) in triples {
        let (ru, ri, rj) = (eu.row(u), ei.row(i), ei.row(j));
        let x = ru
            .iter()
            .zip(ri.iter().zip(rj.iter()))
            .fold(F::zero(), |a, (&a_u, (&a_i, &a_j))| a + a_u * (a_i - a_j));
        let s = (tau * x).to_f64().expect("finite");
        loss -= log_sigmoid(s);
        // d(−log σ(s))/ds = −σ(−s)
        let c = F::of(-1.0 / (1.0 + s.exp())) * tau;
        for k in 0..ru.len() {
            let (a_u, a_i, a_j) = (ru[k], ri[k], rj[k]);
            gu[[u, k]] += c * (a_i - a_j);
            gi[[i, k]] += c * a_u;
            gi[[j, k]] -= c * a_u;
        }
    }
    if let (Some(o), Some(g)) = (&prop, graph) {
        normalize_backward(&o.users, &o.norm_users, &mut gu);
        normalize_backward(&o.items, &o.norm_items, &mut gi);
        let du = &gu + &g.ui.spmm(gi.view());
        let di = &gi + &g.ui.spmm_t(gu.view());
        gu = du;
        gi = di;
    }
    let lam = F::of(p.lambda);
    gu.scaled_add(lam, &p.e_users);
    gi.scaled_add(lam, &p.e_items);
    let sq = |m: &Array2<F>| {
        m.iter()
            .map(|v| v.to_f64().expect("finite").powi(2))
            .sum::<f64>()
    };
    loss += 0.5 * p.lambda * (sq(&p.e_users) + sq(&p.e_items));
    Ok((
        F::of(loss),
        BprParams {
            e_users: gu,
            e_items: gi,
            lambda: p.lambda,
        },
    ))
}

/// Per-user relevant items and items excluded from ranking.
#[derive(Debug, Clone)]
pub struct RankingEval {
    pub targets: Vec<HashSet<usize>>,
    pub exclude: Vec<HashSet<usize>>,
}

impl RankingEval {
    /// Targets from `relevant`; every graph in `exclude` is removed from the
    /// candidate lists.
    pub fn new(relevant: &BipartiteGraph, exclude: &[&BipartiteGraph]) -> Self {
        let nu = relevant.n_users();
        let mut targets = vec![HashSet::new(); nu];
        for &(u, i, _) in relevant.interactions() {
            targets[u].insert(i);
        }
        let mut ex = vec![HashSet::new(); nu];
        for g in exclude {
            for &(u, i, _) in g.interactions() {
                ex[u].insert(i);
            }
        }
        RankingEval {
            targets,
            exclude: ex,
        }
    }

    /// Top-`k` items per user by descending score, ties by item index.
    pub fn top_k<F: Real>(
        &self,
        users: &Array2<F>,
        items: &Array2<F>,
        k: usize,
    ) -> Vec<Vec<usize>> {
        let scores = users.dot(&items.t());
        (0..users.nrows())
            .map(|u| {
                if self.targets[u].is_empty() {
                    return Vec::new();
                }
                let mut cands: Vec<(F, usize)> = scores
                    .row(u)
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !self.exclude[u].contains(i))
                    .map(|(i, &s)| (s, i))
                    .collect();
                let cmp = |a: &(F, usize), b: &(F, usize)| {
                    b.0.partial_cmp(&a.0)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.1.cmp(&b.1))
                };
                let take = k.min(cands.len());
                if take == 0 {
                    return Vec::new();
                }
                if cands.len() > take {
                    cands.select_nth_unstable_by(take - 1, cmp);
                    cands.truncate(take);
                }
                cands.sort_by(cmp);
                cands.into_iter().map(|(_, i)| i).collect()
            })
            .collect()
    }

    /// Mean Recall@k and NDCG@k over users with at least one target.
    pub fn evaluate<F: Real>(
        &self,
        users: &Array2<F>,
        items: &Array2<F>,
        ks: &[usize],
    ) -> Vec<(usize, f64, f64)> {
        let kmax = ks.iter().copied().max().unwrap_or(0);
        let lists = self.top_k(users, items, kmax);
        let active: Vec<usize> = (0..lists.len())
            .filter(|&u| !self.targets[u].is_empty())
            .collect();
        ks.iter()
            .map(|&k| {
                if active.is_empty() {
                    return (k, 0.0, 0.0);
                }
                let (mut r, mut n) = (0.0, 0.0);
                for &u in &active {
                    r += recall_at_k(&lists[u], &self.targets[u], k);
                    n += ndcg_at_k(&lists[u], &self.targets[u], k);
                }
                let m = active.len() as f64;
                (k, r / m, n / m)
            })
            .collect()
    }
}

/// Parameters, optimizer and sampler state; cloning it forks training.
#[derive(Debug, Clone)]
pub struct BprTrainState<F: Real> {
    pub params: BprParams<F>,
    pub opt: Adam<F>,
    pub rng: ChaCha8Rng,
    pub epochs: usize,
}

impl<F: Real> BprTrainState<F> {
    pub fn new(n_users: usize, n_items: usize, dim: usize, lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = BprParams::random(n_users, n_items, dim, lambda, &mut rng);
        let opt = Adam::new(&params);
        BprTrainState {
            params,
            opt,
            rng,
            epochs: 0,
        }
    }

    pub fn embeddings(&self, g: &PropagationGraph) -> Result<(Array2<F>, Array2<F>)> {
        propagated_forward(&self.params, g)
    }
}

/// Summary of one training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct BprTrainLog {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_recall: f64,
}

/// Minibatch BPR training with negatives drawn uniformly from `pool`,
/// early-stopped on validation Recall@20. The state is left at the best
/// validation snapshot.
#[allow(clippy::too_many_arguments)]
pub fn train_bpr<F: Real>(
    state: &mut BprTrainState<F>,
    graph: &PropagationGraph,
    train: &BipartiteGraph,
    pool: &NegativePool,
    val: &RankingEval,
    cfg: &TrainConfig,
    batch_size: usize,
    score_scale: f64,
) -> Result<BprTrainLog> {
    cfg.validate()?;
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be > 0".into()));
    }
    let positives: Vec<(usize, usize)> = train
        .interactions()
        .iter()
        .map(|&(u, i, _)| (u, i))
        .collect();
    if positives.is_empty() {
        return Err(Error::InvalidArgument("no training interactions".into()));
    }
    let n_items = train.n_items();
    let eval_recall = |s: &BprTrainState<F>| -> Result<f64> {
        let (eu, ei) = s.embeddings(graph)?;
        Ok(val.evaluate(&eu, &ei, &[20])[0].1)
    };
    let mut best = state.clone();
    let mut best_recall = eval_recall(state)?;
    let mut best_epoch = 0;
    let mut since = 0;
    let mut run = 0;
    let mut order = positives.clone();
    for epoch in 1..=cfg.epochs {
        order.copy_from_slice(&positives);
        order.shuffle(&mut state.rng);
        for chunk in order.chunks(batch_size) {
            let mut triples = Vec::with_capacity(chunk.len());
            for &(u, i) in chunk {
                if let Some(j) = sample_negative(pool, u, n_items, &mut state.rng) {
                    triples.push((u, i, j));
                }
            }
            if triples.is_empty() {
                continue;
            }
            let (_, grads) = bpr_loss_grad(&state.params, Some(graph), &triples, score_scale)?;
            state.opt.step(&mut state.params, &grads, cfg.lr);
        }
        state.epochs += 1;
        run = epoch;
        let r = eval_recall(state)?;
        if r > best_recall {
            best_recall = r;
            best_epoch = epoch;
            best = state.clone();
            since = 0;
        } else {
            since += 1;
            if cfg.early_stop_patience.is_some_and(|p| since >= p) {
                break;
            }
        }
    }
    *state = best;
    Ok(BprTrainLog {
        epochs_run: run,
        best_epoch,
        best_val_recall: best_recall,
    })
}

/// Rejection sampling attempts before a user is treated as having no
/// negatives.
const NEGATIVE_ATTEMPTS: usize = 10_000;

fn sample_negative(
    pool: &NegativePool,
    u: usize,
    n_items: usize,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    (0..NEGATIVE_ATTEMPTS)
        .map(|_| rng.random_range(0..n_items))
        .find(|&j| pool.contains(u, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn empty_graph_only_normalizes() {
        let g = BipartiteGraph::new(2, 2, std::iter::empty()).unwrap();
        let p = BprParams {
            e_users: array![[3.0, 4.0], [1.0, 0.0]],
            e_items: array![[0.0, 2.0], [1.0, 1.0]],
            lambda: 0.0,
        };
        let (u, i) = bpr_embed_forward(&p, &g).unwrap();
        assert_eq!(u, array![[0.6, 0.8], [1.0, 0.0]]);
        assert!((i[[1, 0]] - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_pair_scalar() {
        let g = BipartiteGraph::new(1, 1, [(0, 0, 1.0)]).unwrap();
        let p = BprParams {
            e_users: array![[-0.5]],
            e_items: array![[2.0]],
            lambda: 0.0,
        };
        let (u, i) = bpr_embed_forward(&p, &g).unwrap();
        // −0.5 + 2 = 1.5 → 1; 2 − 0.5 = 1.5 → 1.
        assert_eq!((u[[0, 0]], i[[0, 0]]), (1.0, 1.0));
    }

    #[test]
    fn equal_items_give_log_two() {
        let p = BprParams {
            e_users: array![[0.3, -0.2]],
            e_items: array![[1.0, 2.0], [1.0, 2.0]],
            lambda: 0.0,
        };
        let (loss, _) = bpr_loss_grad(&p, None, &[(0, 0, 1)], 1.0).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert!(bpr_loss_grad(&p, None, &[], 1.0).is_err());
    }
}
