//! Small neural models with hand-derived gradients.
//!
//! Everything is generic over [`Real`] so the same code trains in `f32` and
//! is gradient-checked in `f64`.

mod bpr;
mod checkpoint;
mod gcn;
mod vgae;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::real::Real;

pub use bpr::{
    bpr_embed_forward, bpr_loss_grad, train_bpr, BprParams, BprTrainLog, BprTrainState,
    PropagationGraph, RankingEval,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Manifest, TensorEntry};
pub use gcn::{
    gcn_forward, gcn_loss_grad, mc_dropout_predict, sample_dropout_masks, train_gcn, DropoutMasks,
    GcnModel, GcnParams,
};
pub use vgae::{train_vgae, vgae_encode, vgae_loss_grad, EmbeddingSample, ReconTarget, VgaeParams};

/// A fixed, ordered collection of named parameter tensors.
pub trait Params<F: Real>: Clone {
    fn tensors(&self) -> Vec<&Array2<F>>;
    fn tensors_mut(&mut self) -> Vec<&mut Array2<F>>;
    fn names(&self) -> Vec<&'static str>;

    fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(F::zero());
        }
        out
    }

    fn n_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// `None` disables early stopping.
    pub early_stop_patience: Option<usize>,
    pub mc_samples: usize,
}

impl TrainConfig {
    /// Two-layer GCN defaults.
    pub fn gcn() -> Self {
        TrainConfig {
            lr: 0.01,
            epochs: 200,
            dropout_rate: 0.5,
            weight_decay: 5e-4,
            seed: 0,
            early_stop_patience: Some(10),
            mc_samples: 20,
        }
    }

    pub fn vgae() -> Self {
        TrainConfig {
            lr: 0.01,
            epochs: 200,
            dropout_rate: 0.0,
            weight_decay: 0.0,
            seed: 0,
            early_stop_patience: None,
            mc_samples: 1,
        }
    }

    /// BPR embedder; `weight_decay` is the prior precision λ.
    pub fn bpr() -> Self {
        TrainConfig {
            lr: 0.005,
            epochs: 1000,
            dropout_rate: 0.0,
            weight_decay: 1e-4,
            seed: 0,
            early_stop_patience: Some(50),
            mc_samples: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(crate::Error::InvalidArgument(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.mc_samples == 0 {
            return Err(crate::Error::InvalidArgument(
                "mc_samples must be >= 1".into(),
            ));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(crate::Error::InvalidArgument(
                "lr must be > 0 and weight decay >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<F: Real> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Array2<F>>,
    v: Vec<Array2<F>>,
}

impl<F: Real> Adam<F> {
    pub fn new<P: Params<F>>(params: &P) -> Self {
        let zeros: Vec<Array2<F>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.raw_dim()))
            .collect();
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update of `params` against `grads`.
    pub fn step<P: Params<F>>(&mut self, params: &mut P, grads: &P, lr: f64) {
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2) = (F::of(self.beta1), F::of(self.beta2));
        let (one_b1, one_b2) = (F::of(1.0 - self.beta1), F::of(1.0 - self.beta2));
        let step = F::of(lr * bc2.sqrt() / bc1);
        let eps = F::of(self.eps * bc2.sqrt());
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = b1 * *m + one_b1 * g;
                    *v = b2 * *v + one_b2 * g * g;
                    *p -= step * *m / (v.sqrt() + eps);
                });
        }
    }
}

/// Free-function form of [`Adam::step`].
pub fn adam_step<F: Real, P: Params<F>>(state: &mut Adam<F>, params: &mut P, grads: &P, lr: f64) {
    state.step(params, grads, lr);
}

/// Uniform Glorot initialization.
pub fn glorot<F: Real>(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<F> {
    let r = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.random_range(-r..r)))
}

/// Coordinates checked exhaustively below this size; random directions above.
const FD_EXHAUSTIVE_MAX: usize = 4096;
const FD_DIRECTIONS: usize = 64;

/// Largest relative error between `analytic` and central differences of
/// `loss` around `params`.
///
/// Small parameter sets are checked coordinate by coordinate; larger ones
/// along random unit directions.
pub fn finite_diff_check<P, L>(loss: L, params: &P, analytic: &P, step: f64) -> f64
where
    P: Params<f64>,
    L: Fn(&P) -> f64,
{
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    let mut worst = 0.0f64;
    if params.n_scalars() <= FD_EXHAUSTIVE_MAX {
        let n_tensors = params.tensors().len();
        for t in 0..n_tensors {
            let len = params.tensors()[t].len();
            for k in 0..len {
                let mut plus = params.clone();
                let mut minus = params.clone();
                plus.tensors_mut()[t].as_slice_mut().expect("contiguous")[k] += step;
                minus.tensors_mut()[t].as_slice_mut().expect("contiguous")[k] -= step;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
                let a = analytic.tensors()[t].as_slice().expect("contiguous")[k];
                worst = worst.max(rel(a, numeric));
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..FD_DIRECTIONS {
            let mut dir = params.zeros_like();
            let mut norm = 0.0;
            for t in dir.tensors_mut() {
                t.mapv_inplace(|_| {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    norm += x * x;
                    x
                });
            }
            let norm = norm.sqrt();
            let mut plus = params.clone();
            let mut minus = params.clone();
            let mut directional = 0.0;
            for (((p, m), d), a) in plus
                .tensors_mut()
                .into_iter()
                .zip(minus.tensors_mut())
                .zip(dir.tensors())
                .zip(analytic.tensors())
            {
                ndarray::Zip::from(p)
                    .and(m)
                    .and(d)
                    .and(a)
                    .for_each(|p, m, &d, &a| {
                        *p += step * d / norm;
                        *m -= step * d / norm;
                        directional += a * d / norm;
                    });
            }
            let numeric = (loss(&plus) - loss(&minus)) / (2.0 * step);
            worst = worst.max(rel(directional, numeric));
        }
    }
    worst
}

/// Inverted-dropout mask: entries are `0` or `1/(1−rate)`.
pub(crate) fn dropout_mask<F: Real>(
    shape: (usize, usize),
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> Array2<F> {
    let keep = F::of(1.0 / (1.0 - rate));
    Array2::from_shape_simple_fn(shape, || {
        if rng.random::<f64>() < rate {
            F::zero()
        } else {
            keep
        }
    })
}

pub(crate) fn relu<F: Real>(x: &Array2<F>) -> Array2<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

/// Row-wise softmax.
pub(crate) fn softmax_rows<F: Real>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        row.mapv_inplace(|v| (v - max).exp());
        let s = row.sum();
        row.mapv_inplace(|v| v / s);
    }
    out
}

/// Converts an `f64` parameter set to another precision.
pub fn cast_params<P, Q, F, G>(src: &P, dst: &mut Q)
where
    F: Real,
    G: Real,
    P: Params<F>,
    Q: Params<G>,
{
    for (d, s) in dst.tensors_mut().into_iter().zip(src.tensors()) {
        *d = s.mapv(|x| G::of(x.to_f64().expect("finite")));
    }
}
