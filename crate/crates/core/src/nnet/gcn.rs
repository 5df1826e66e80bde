//! Two-layer graph convolutional classifier.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{dropout_mask, glorot, relu, softmax_rows, Adam, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct GcnParams<F: Real> {
    /// `[f_in × hidden]`
    pub w0: Array2<F>,
    /// `[hidden × n_classes]`
    pub w1: Array2<F>,
}

impl<F: Real> GcnParams<F> {
    pub fn glorot(f_in: usize, hidden: usize, n_classes: usize, rng: &mut ChaCha8Rng) -> Self {
        GcnParams {
            w0: glorot(f_in, hidden, rng),
            w1: glorot(hidden, n_classes, rng),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.w1.ncols()
    }
}

impl<F: Real> Params<F> for GcnParams<F> {
    fn tensors(&self) -> Vec<&Array2<F>> {
        vec![&self.w0, &self.w1]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Array2<F>> {
        vec![&mut self.w0, &mut self.w1]
    }
    fn names(&self) -> Vec<&'static str> {
        vec!["w0", "w1"]
    }
}

/// Dropout masks for the inputs of both layers.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<F: Real> {
    /// `[n × f_in]`
    pub input: Array2<F>,
    /// `[n × hidden]`
    pub hidden: Array2<F>,
}

pub fn sample_dropout_masks<F: Real>(
    n: usize,
    f_in: usize,
    hidden: usize,
    rate: f64,
    rng: &mut ChaCha8Rng,
) -> DropoutMasks<F> {
    DropoutMasks {
        input: dropout_mask((n, f_in), rate, rng),
        hidden: dropout_mask((n, hidden), rate, rng),
    }
}

struct Cache<F: Real> {
    xd: Option<Array2<F>>,
    pre: Array2<F>,
    hd: Array2<F>,
    probs: Array2<F>,
}

fn check_shapes<F: Real>(
    p: &GcnParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    masks: Option<&DropoutMasks<F>>,
) -> Result<()> {
    let n = a.n_nodes();
    if x.nrows() != n {
        return Err(Error::Dimension(format!(
            "{} feature rows for {n} nodes",
            x.nrows()
        )));
    }
    if x.ncols() != p.w0.nrows() {
        return Err(Error::Dimension(format!(
            "{} features but w0 has {} rows",
            x.ncols(),
            p.w0.nrows()
        )));
    }
    if p.w0.ncols() != p.w1.nrows() {
        return Err(Error::Dimension("w0 columns differ from w1 rows".into()));
    }
    if let Some(m) = masks {
        if m.input.dim() != x.dim() || m.hidden.dim() != (n, p.w0.ncols()) {
            return Err(Error::Dimension("dropout mask shape".into()));
        }
    }
    Ok(())
}

fn forward_cache<F: Real>(
    p: &GcnParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    masks: Option<&DropoutMasks<F>>,
) -> Result<Cache<F>> {
    check_shapes(p, a, x, masks)?;
    let xd = masks.map(|m| &x * &m.input);
    let xw = match &xd {
        Some(xd) => xd.dot(&p.w0),
        None => x.dot(&p.w0),
    };
    let pre = a.spmm(xw.view());
    let mut hd = relu(&pre);
    if let Some(m) = masks {
        hd *= &m.hidden;
    }
    let logits = a.spmm(hd.dot(&p.w1).view());
    Ok(Cache {
        xd,
        pre,
        hd,
        probs: softmax_rows(&logits),
    })
}

/// Class probabilities `softmax(Â · ReLU(Â·X_drop·W0)_drop · W1)`.
pub fn gcn_forward<F: Real>(
    p: &GcnParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    masks: Option<&DropoutMasks<F>>,
) -> Result<Array2<F>> {
    forward_cache(p, a, x, masks).map(|c| c.probs)
}

fn check_labels(labels: &[usize], n: usize, n_classes: usize, idx: &[usize]) -> Result<()> {
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} nodes",
            labels.len()
        )));
    }
    if idx.is_empty() {
        return Err(Error::InvalidArgument("empty training mask".into()));
    }
    for &i in idx {
        if i >= n {
            return Err(Error::OutOfRange { index: i, len: n });
        }
        if labels[i] >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "label {} of node {i} exceeds {n_classes} classes",
                labels[i]
            )));
        }
    }
    Ok(())
}

fn cross_entropy<F: Real>(probs: &Array2<F>, labels: &[usize], idx: &[usize]) -> F {
    let tiny = F::min_positive_value();
    let total = idx.iter().fold(F::zero(), |acc, &i| {
        acc - probs[[i, labels[i]]].max(tiny).ln()
    });
    total / F::of(idx.len() as f64)
}

/// Masked mean cross-entropy plus `(weight_decay/2)·‖W0‖²`, with exact
/// gradients for the same forward pass (masks included).
#[allow(clippy::too_many_arguments)]
pub fn gcn_loss_grad<F: Real>(
    p: &GcnParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    labels: &[usize],
    train_idx: &[usize],
    weight_decay: f64,
    masks: Option<&DropoutMasks<F>>,
) -> Result<(F, GcnParams<F>)> {
    check_labels(labels, a.n_nodes(), p.n_classes(), train_idx)?;
    let c = forward_cache(p, a, x, masks)?;
    let wd = F::of(weight_decay);
    let half = F::of(0.5);
    let loss = cross_entropy(&c.probs, labels, train_idx)
        + half * wd * p.w0.iter().fold(F::zero(), |a, &v| a + v * v);

    let inv = F::one() / F::of(train_idx.len() as f64);
    let mut g_logits = Array2::<F>::zeros(c.probs.raw_dim());
    for &i in train_idx {
        let mut row = g_logits.row_mut(i);
        row.assign(&c.probs.row(i));
        row[labels[i]] -= F::one();
        row.mapv_inplace(|v| v * inv);
    }
    let g_q = a.spmm_t(g_logits.view());
    let g_w1 = c.hd.t().dot(&g_q);
    let mut g_h = g_q.dot(&p.w1.t());
    if let Some(m) = masks {
        g_h *= &m.hidden;
    }
    ndarray::Zip::from(&mut g_h).and(&c.pre).for_each(|g, &z| {
        if z <= F::zero() {
            *g = F::zero();
        }
    });
    let g_xw = a.spmm_t(g_h.view());
    let mut g_w0 = match &c.xd {
        Some(xd) => xd.t().dot(&g_xw),
        None => x.t().dot(&g_xw),
    };
    g_w0.scaled_add(wd, &p.w0);
    Ok((loss, GcnParams { w0: g_w0, w1: g_w1 }))
}

/// Average of `samples` stochastic forward passes with fresh dropout masks.
/// With `rate == 0` no masks are drawn and each pass is deterministic.
pub fn mc_dropout_predict<F: Real>(
    p: &GcnParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    samples: usize,
    rate: f64,
    seed: u64,
) -> Result<Array2<F>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc: Option<Array2<F>> = None;
    for _ in 0..samples {
        let masks = (rate > 0.0)
            .then(|| sample_dropout_masks(x.nrows(), x.ncols(), p.w0.ncols(), rate, &mut rng));
        let probs = gcn_forward(p, a, x, masks.as_ref())?;
        acc = Some(match acc {
            None => probs,
            Some(s) => s + probs,
        });
    }
    let total = acc.expect("samples >= 1");
    if samples == 1 {
        return Ok(total);
    }
    Ok(total / F::of(samples as f64))
}

#[derive(Debug, Clone)]
pub struct GcnModel<F: Real> {
    pub params: GcnParams<F>,
    pub epochs_run: usize,
    pub val_loss: Vec<f64>,
}

/// Trains with Adam and dropout. With a patience `p` and a validation set,
/// training stops once the validation loss exceeds the mean of the previous
/// `p` epochs.
#[allow(clippy::too_many_arguments)]
pub fn train_gcn<F: Real>(
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    labels: &[usize],
    train_idx: &[usize],
    val_idx: &[usize],
    hidden: usize,
    n_classes: usize,
    cfg: &TrainConfig,
) -> Result<GcnModel<F>> {
    cfg.validate()?;
    check_labels(labels, a.n_nodes(), n_classes, train_idx)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = GcnParams::glorot(x.ncols(), hidden, n_classes, &mut rng);
    let mut opt = Adam::new(&params);
    let mut val_loss = Vec::new();
    let mut epochs_run = 0;
    for epoch in 0..cfg.epochs {
        let masks = (cfg.dropout_rate > 0.0).then(|| {
            sample_dropout_masks(x.nrows(), x.ncols(), hidden, cfg.dropout_rate, &mut rng)
        });
        let (_, grads) = gcn_loss_grad(
            &params,
            a,
            x,
            labels,
            train_idx,
            cfg.weight_decay,
            masks.as_ref(),
        )?;
        opt.step(&mut params, &grads, cfg.lr);
        epochs_run = epoch + 1;
        if let (Some(patience), false) = (cfg.early_stop_patience, val_idx.is_empty()) {
            let probs = gcn_forward(&params, a, x, None)?;
            let vl = cross_entropy(&probs, labels, val_idx)
                .to_f64()
                .unwrap_or(f64::INFINITY);
            if epoch >= patience {
                let window = &val_loss[val_loss.len() - patience..];
                let mean = window.iter().sum::<f64>() / patience as f64;
                if vl > mean {
                    val_loss.push(vl);
                    break;
                }
            }
            val_loss.push(vl);
        }
    }
    Ok(GcnModel {
        params,
        epochs_run,
        val_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{normalize_adjacency, WeightedGraph};
    use ndarray::array;

    fn path3() -> NormalizedAdjacency {
        normalize_adjacency(&WeightedGraph::from_pairs(3, [(0, 1), (1, 2)]).unwrap())
    }

    #[test]
    fn zero_output_weights_give_uniform_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut p = GcnParams::<f64>::glorot(2, 4, 3, &mut rng);
        p.w1.fill(0.0);
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let probs = gcn_forward(&p, &path3(), x.view(), None).unwrap();
        assert!(probs.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_node_scalar_chain() {
        let a = normalize_adjacency(&WeightedGraph::empty(1));
        let p = GcnParams {
            w0: array![[2.0]],
            w1: array![[1.5, -0.5]],
        };
        let x = array![[1.0]];
        let probs = gcn_forward(&p, &a, x.view(), None).unwrap();
        // Â = [1], hidden = relu(2) = 2, logits = [3, -1].
        let e = (4.0f64).exp();
        assert!((probs[[0, 0]] - e / (e + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GcnParams::<f64>::glorot(2, 4, 2, &mut rng);
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        assert!(gcn_loss_grad(&p, &path3(), x.view(), &[0, 1, 0], &[], 0.0, None).is_err());
    }

    #[test]
    fn rate_zero_single_sample_is_deterministic_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = GcnParams::<f32>::glorot(2, 4, 2, &mut rng);
        let x = array![[1.0f32, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let det = gcn_forward(&p, &path3(), x.view(), None).unwrap();
        let mc = mc_dropout_predict(&p, &path3(), x.view(), 1, 0.0, 99).unwrap();
        assert_eq!(det, mc);
    }
}
