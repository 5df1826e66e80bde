//! Variational graph autoencoder with an inner-product decoder.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{glorot, relu, Adam, Params, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::{NormalizedAdjacency, WeightedGraph};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct VgaeParams<F: Real> {
    /// `[f_in × hidden]`
    pub w0: Array2<F>,
    /// `[hidden × latent]`
    pub w_mu: Array2<F>,
    /// `[hidden × latent]`
    pub w_logvar: Array2<F>,
}

impl<F: Real> VgaeParams<F> {
    pub fn glorot(f_in: usize, hidden: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        VgaeParams {
            w0: glorot(f_in, hidden, rng),
            w_mu: glorot(hidden, latent, rng),
            w_logvar: glorot(hidden, latent, rng),
        }
    }
}

impl<F: Real> Params<F> for VgaeParams<F> {
    fn tensors(&self) -> Vec<&Array2<F>> {
        vec![&self.w0, &self.w_mu, &self.w_logvar]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Array2<F>> {
        vec![&mut self.w0, &mut self.w_mu, &mut self.w_logvar]
    }
    fn names(&self) -> Vec<&'static str> {
        vec!["w0", "w_mu", "w_logvar"]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSample<F: Real> {
    pub mu: Array2<F>,
    pub logvar: Array2<F>,
    /// `mu + exp(logvar/2) ∘ ε`, or `mu` when no noise was drawn.
    pub z: Array2<F>,
}

/// Binary reconstruction target with its class weighting.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconTarget {
    n: usize,
    /// Row-major `n × n`.
    positive: Vec<bool>,
    pub pos_weight: f64,
    pub norm: f64,
}

impl ReconTarget {
    /// Adjacency of `g` plus self-loops. Weights are computed from the
    /// `2m` off-diagonal positives: `pos_weight = (n² − 2m)/(2m)`,
    /// `norm = n² / (2(n² − 2m))`.
    pub fn with_self_loops(g: &WeightedGraph) -> Result<Self> {
        let n = g.n_nodes();
        let m2 = 2 * g.n_edges();
        if m2 == 0 {
            return Err(Error::InvalidArgument(
                "reconstruction target has no edges".into(),
            ));
        }
        let mut positive = vec![false; n * n];
        for i in 0..n {
            positive[i * n + i] = true;
        }
        for &(i, j, _) in g.edges() {
            positive[i * n + j] = true;
            positive[j * n + i] = true;
        }
        let nn = (n * n) as f64;
        Ok(ReconTarget {
            n,
            positive,
            pos_weight: (nn - m2 as f64) / m2 as f64,
            norm: nn / (2.0 * (nn - m2 as f64)),
        })
    }

    /// Explicit target from a row-major mask.
    pub fn new(n: usize, positive: Vec<bool>, pos_weight: f64, norm: f64) -> Result<Self> {
        if positive.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} mask entries for n = {n}",
                positive.len()
            )));
        }
        Ok(ReconTarget {
            n,
            positive,
            pos_weight,
            norm,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positive[i * self.n + j]
    }
}

struct Encoded<F: Real> {
    pre: Array2<F>,
    ah: Array2<F>,
    mu: Array2<F>,
    logvar: Array2<F>,
}

fn encode<F: Real>(
    p: &VgaeParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
) -> Result<Encoded<F>> {
    if x.nrows() != a.n_nodes() || x.ncols() != p.w0.nrows() {
        return Err(Error::Dimension(format!(
            "features {:?} for {} nodes and w0 {:?}",
            x.dim(),
            a.n_nodes(),
            p.w0.dim()
        )));
    }
    if p.w_mu.dim() != p.w_logvar.dim() || p.w_mu.nrows() != p.w0.ncols() {
        return Err(Error::Dimension("encoder head shapes".into()));
    }
    let pre = a.spmm(x.dot(&p.w0).view());
    let ah = a.spmm(relu(&pre).view());
    let mu = ah.dot(&p.w_mu);
    let logvar = ah.dot(&p.w_logvar);
    Ok(Encoded {
        pre,
        ah,
        mu,
        logvar,
    })
}

fn noise<F: Real>(shape: (usize, usize), seed: u64) -> Array2<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn(shape, || F::of(rng.sample::<f64, _>(StandardNormal)))
}

/// Encoder output; `seed = None` returns `z = mu`.
pub fn vgae_encode<F: Real>(
    p: &VgaeParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    seed: Option<u64>,
) -> Result<EmbeddingSample<F>> {
    let e = encode(p, a, x)?;
    let z = match seed {
        None => e.mu.clone(),
        Some(s) => {
            let eps = noise::<F>(e.mu.dim(), s);
            let half = F::of(0.5);
            &e.mu + &(e.logvar.mapv(|v| (half * v).exp()) * &eps)
        }
    };
    Ok(EmbeddingSample {
        mu: e.mu,
        logvar: e.logvar,
        z,
    })
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Negative ELBO: weighted reconstruction cross-entropy of `σ(ZZᵀ)` against
/// the target plus `(1/n)` times the mean per-node KL to `𝒩(0, I)`.
/// `seed` fixes the reparameterization noise.
pub fn vgae_loss_grad<F: Real>(
    p: &VgaeParams<F>,
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    target: &ReconTarget,
    seed: u64,
) -> Result<(F, VgaeParams<F>)> {
    let n = a.n_nodes();
    if target.n_nodes() != n {
        return Err(Error::Dimension(format!(
            "target over {} nodes, graph has {n}",
            target.n_nodes()
        )));
    }
    let e = encode(p, a, x)?;
    let eps = noise::<F>(e.mu.dim(), seed);
    let half = F::of(0.5);
    let std = e.logvar.mapv(|v| (half * v).exp());
    let z = &e.mu + &(&std * &eps);

    let nn = (n * n) as f64;
    let scale = target.norm / nn;
    let pw = target.pos_weight;
    let mut g = z.dot(&z.t());
    let mut recon = 0.0f64;
    for (k, l) in g.iter_mut().enumerate() {
        let lf = l.to_f64().expect("finite");
        let pos = target.positive[k];
        recon += if pos {
            pw * softplus(-lf)
        } else {
            softplus(lf)
        };
        let s = sigmoid(lf);
        let d = if pos { -pw * (1.0 - s) } else { s };
        *l = F::of(scale * d);
    }
    recon *= scale;

    let kl_scale = 0.5 / nn;
    let mut kl = 0.0f64;
    for (&m, &lv) in e.mu.iter().zip(&e.logvar) {
        let (m, lv) = (m.to_f64().expect("finite"), lv.to_f64().expect("finite"));
        kl -= 1.0 + lv - m * m - lv.exp();
    }
    kl *= kl_scale;

    let g_z = g.dot(&z) + g.t().dot(&z);
    let inv_nn = F::of(1.0 / nn);
    let g_mu = &g_z + &e.mu.mapv(|m| m * inv_nn);
    let kls = F::of(kl_scale);
    let mut g_lv = &g_z * &eps * &std * half;
    ndarray::Zip::from(&mut g_lv)
        .and(&e.logvar)
        .for_each(|g, &lv| *g -= kls * (F::one() - lv.exp()));

    let g_wmu = e.ah.t().dot(&g_mu);
    let g_wlv = e.ah.t().dot(&g_lv);
    let g_ah = g_mu.dot(&p.w_mu.t()) + g_lv.dot(&p.w_logvar.t());
    let mut g_pre = a.spmm_t(g_ah.view());
    ndarray::Zip::from(&mut g_pre)
        .and(&e.pre)
        .for_each(|g, &z| {
            if z <= F::zero() {
                *g = F::zero();
            }
        });
    let g_w0 = x.t().dot(&a.spmm_t(g_pre.view()));
    Ok((
        F::of(recon + kl),
        VgaeParams {
            w0: g_w0,
            w_mu: g_wmu,
            w_logvar: g_wlv,
        },
    ))
}

/// Full-batch Adam training for a fixed number of epochs.
pub fn train_vgae<F: Real>(
    a: &NormalizedAdjacency,
    x: ArrayView2<'_, F>,
    target: &ReconTarget,
    hidden: usize,
    latent: usize,
    cfg: &TrainConfig,
) -> Result<VgaeParams<F>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = VgaeParams::glorot(x.ncols(), hidden, latent, &mut rng);
    let mut opt = Adam::new(&params);
    for _ in 0..cfg.epochs {
        let (_, grads) = vgae_loss_grad(&params, a, x, target, rng.random())?;
        opt.step(&mut params, &grads, cfg.lr);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::normalize_adjacency;

    #[test]
    fn pos_weight_and_norm() {
        let g = WeightedGraph::from_pairs(4, [(0, 1), (1, 2)]).unwrap();
        let t = ReconTarget::with_self_loops(&g).unwrap();
        assert_eq!(t.pos_weight, 12.0 / 4.0);
        assert_eq!(t.norm, 16.0 / 24.0);
        assert!(t.is_positive(1, 0) && t.is_positive(3, 3) && !t.is_positive(0, 2));
    }

    #[test]
    fn kl_vanishes_at_prior() {
        // Zero heads give mu = logvar = 0 and z = eps.
        let g = WeightedGraph::from_pairs(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let a = normalize_adjacency(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = VgaeParams::<f64>::glorot(2, 3, 2, &mut rng);
        p.w_mu.fill(0.0);
        p.w_logvar.fill(0.0);
        let x = Array2::from_elem((3, 2), 1.0);
        let t = ReconTarget::with_self_loops(&g).unwrap();
        let (loss, _) = vgae_loss_grad(&p, &a, x.view(), &t, 5).unwrap();
        let eps = noise::<f64>((3, 2), 5);
        let logits = eps.dot(&eps.t());
        let recon: f64 = logits
            .iter()
            .map(|&l| t.pos_weight * softplus(-l))
            .sum::<f64>()
            * t.norm
            / 9.0;
        assert!((loss - recon).abs() < 1e-12);
    }
}
