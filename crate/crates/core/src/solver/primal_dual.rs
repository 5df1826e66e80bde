//! Forward–backward–forward primal–dual iteration.
//!
//! The primal variable is the edge vector, the dual lives on node degrees.
//! The nonnegativity and linear terms are handled by a shifted projection,
//! the log barrier through the resolvent of its conjugate, and the ridge term
//! explicitly.

use super::{isolated_edge_optimum, kkt_parts, objective_parts, SolverConfig, SolverResult};
use crate::distance::DistanceMatrix;

/// Default step: below the inverse Lipschitz bound `1/(4β + ‖S‖)` with
/// `‖S‖² ≤ 2·max support degree`.
pub(crate) fn default_step(d: &DistanceMatrix, beta: f64) -> f64 {
    let max_deg = d.support_degrees().into_iter().max().unwrap_or(1) as f64;
    0.95 / (4.0 * beta + (2.0 * max_deg).sqrt())
}

pub(super) fn solve(d: &DistanceMatrix, cfg: &SolverConfig, init: Option<&[f64]>) -> SolverResult {
    let n = d.n_nodes();
    let pairs = d.pairs();
    let dv = d.values();
    let m = pairs.len();
    let (alpha, beta) = (cfg.alpha, cfg.beta);
    let gamma = cfg.step.unwrap_or_else(|| default_step(d, beta));

    let mut w: Vec<f64> = match init {
        Some(w0) => w0.iter().map(|&x| x.max(0.0)).collect(),
        None => dv
            .iter()
            .map(|&x| isolated_edge_optimum(x, alpha, beta))
            .collect(),
    };
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut sw = vec![0.0; n];
    let mut sp = vec![0.0; n];
    let mut ybar = vec![0.0; n];
    let mut pbar = vec![0.0; n];

    let mut trace = Vec::new();
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        sw.iter_mut().for_each(|x| *x = 0.0);
        for (&(i, j), &we) in pairs.iter().zip(&w) {
            sw[i] += we;
            sw[j] += we;
        }
        for e in 0..m {
            let (i, j) = pairs[e];
            y[e] = w[e] - gamma * (4.0 * beta * w[e] + v[i] + v[j]);
            p[e] = (y[e] - 2.0 * gamma * dv[e]).max(0.0);
        }
        for i in 0..n {
            ybar[i] = v[i] + gamma * sw[i];
            pbar[i] = 0.5 * (ybar[i] - (ybar[i] * ybar[i] + 4.0 * alpha * gamma).sqrt());
        }
        sp.iter_mut().for_each(|x| *x = 0.0);
        for (&(i, j), &pe) in pairs.iter().zip(&p) {
            sp[i] += pe;
            sp[j] += pe;
        }
        let mut change = 0.0f64;
        let mut norm = 0.0f64;
        for e in 0..m {
            let (i, j) = pairs[e];
            let q = p[e] - gamma * (4.0 * beta * p[e] + pbar[i] + pbar[j]);
            let next = w[e] - y[e] + q;
            change += (next - w[e]) * (next - w[e]);
            norm += next * next;
            w[e] = next;
        }
        for i in 0..n {
            let qbar = pbar[i] + gamma * sp[i];
            v[i] = v[i] - ybar[i] + qbar;
        }
        iterations += 1;
        trace.push(objective_parts(n, pairs, dv, &p, alpha, beta).unwrap_or(f64::INFINITY));
        kkt = kkt_parts(n, pairs, dv, &p, alpha, beta);
        if kkt <= cfg.kkt_tol {
            break;
        }
        if change.sqrt() <= cfg.tol * norm.sqrt().max(1.0) && iterations > 10 {
            break;
        }
    }
    SolverResult {
        n_nodes: n,
        pairs: pairs.to_vec(),
        weights: p,
        objective_trace: trace,
        iterations,
        converged: kkt <= cfg.kkt_tol,
        kkt_residual: kkt,
    }
}
