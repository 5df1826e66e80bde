//! Density-targeted solve: a single scale `θ` on the distances with
//! `α = β = 1`, found by bisection in `log θ`.

use serde::{Deserialize, Serialize};

use super::{solve_from, SolverConfig, SolverResult};
use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoConfig {
    /// Inner solver settings; `alpha` and `beta` are overridden to 1.
    pub solver: SolverConfig,
    pub theta_min: f64,
    pub theta_max: f64,
    pub max_steps: usize,
    /// Accepted relative deviation of the mean degree from the target.
    pub rel_tolerance: f64,
}

impl Default for AutoConfig {
    fn default() -> Self {
        AutoConfig {
            solver: SolverConfig::default(),
            theta_min: 1e-6,
            theta_max: 1e6,
            max_steps: 30,
            rel_tolerance: 0.1,
        }
    }
}

/// Solves `solve(θ·D, 1, 1)` with `θ` chosen so the mean degree of present
/// edges lands within the tolerance of `target_mean_degree`.
///
/// If the target is not reached within `max_steps`, the last iterate is
/// returned with `converged = false`.
pub fn solve_auto(
    d: &DistanceMatrix,
    target_mean_degree: f64,
    cfg: &AutoConfig,
) -> Result<(SolverResult, f64)> {
    let n = d.n_nodes();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let ceiling = 2.0 * d.len() as f64 / n as f64;
    if !(target_mean_degree > 0.0) || target_mean_degree > ceiling * (1.0 + 1e-12) {
        return Err(Error::UnreachableTarget {
            target: target_mean_degree,
            reason: format!("support allows a mean degree of at most {ceiling:.4}"),
        });
    }
    if !(cfg.theta_min > 0.0 && cfg.theta_min < cfg.theta_max) {
        return Err(Error::InvalidArgument(
            "need 0 < theta_min < theta_max".into(),
        ));
    }
    let inner = SolverConfig {
        alpha: 1.0,
        beta: 1.0,
        ..cfg.solver.clone()
    };
    let (mut lo, mut hi) = (cfg.theta_min.ln(), cfg.theta_max.ln());
    let mut warm: Option<Vec<f64>> = None;
    let mut last = None;
    for _ in 0..cfg.max_steps.max(1) {
        let mid = 0.5 * (lo + hi);
        let theta = mid.exp();
        let r = solve_from(&d.scaled(theta), &inner, warm.as_deref())?;
        let md = r.mean_degree();
        log::debug!("theta {theta:.4e}: mean degree {md:.3} (target {target_mean_degree})");
        if (md - target_mean_degree).abs() <= cfg.rel_tolerance * target_mean_degree {
            return Ok((r, theta));
        }
        if md > target_mean_degree {
            lo = mid;
        } else {
            hi = mid;
        }
        warm = Some(r.weights.clone());
        last = Some((r, theta));
    }
    let (mut r, theta) = last.expect("at least one step");
    r.converged = false;
    Ok((r, theta))
}
