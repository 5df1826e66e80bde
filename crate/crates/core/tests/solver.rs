use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use structlearn::distance::DistanceMatrix;
use structlearn::solver::{
    kkt_residual, objective, solve, solve_auto, solve_bipartite, AutoConfig, Scheme, SolverConfig,
};

fn random_full(n: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut vals = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
            vals.push(rng.random_range(0.0..2.0));
        }
    }
    DistanceMatrix::new(n, pairs, vals).unwrap()
}

fn random_points_support(n: usize, k: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let support = structlearn::neighbors::exact_knn(pts.view(), k).unwrap();
    structlearn::distance::embedding_sq_euclidean(pts.view(), &support.pairs).unwrap()
}

/// Objective evaluated on the full symmetric adjacency matrix.
fn dense_objective(d: &DistanceMatrix, w: &[f64], alpha: f64, beta: f64) -> f64 {
    let n = d.n_nodes();
    let mut a = Array2::<f64>::zeros((n, n));
    let mut dm = Array2::<f64>::zeros((n, n));
    for ((i, j, dv), &x) in d.iter().zip(w) {
        a[[i, j]] = x;
        a[[j, i]] = x;
        dm[[i, j]] = dv;
        dm[[j, i]] = dv;
    }
    let hadamard: f64 = (&a * &dm).sum();
    let logdeg: f64 = a.sum_axis(ndarray::Axis(1)).iter().map(|x| x.ln()).sum();
    let frob: f64 = a.iter().map(|x| x * x).sum();
    hadamard - alpha * logdeg + beta * frob
}

/// Projected gradient with diminishing steps, run for a fixed budget.
fn projected_gradient_oracle(d: &DistanceMatrix, alpha: f64, beta: f64, iters: usize) -> Vec<f64> {
    let n = d.n_nodes();
    let m = d.len();
    let mut w = vec![1.0; m];
    let mut grad = vec![0.0; m];
    let mut deg = vec![0.0; n];
    for t in 0..iters {
        deg.iter_mut().for_each(|x| *x = 0.0);
        for (&(i, j), &x) in d.pairs().iter().zip(&w) {
            deg[i] += x;
            deg[j] += x;
        }
        for (e, ((i, j, dv), &x)) in d.iter().zip(&w).enumerate() {
            grad[e] = 2.0 * dv - alpha * (1.0 / deg[i] + 1.0 / deg[j]) + 4.0 * beta * x;
        }
        let mut eta = 0.05 / (1.0 + t as f64 / 1000.0).sqrt();
        loop {
            let trial: Vec<f64> = w
                .iter()
                .zip(&grad)
                .map(|(x, g)| (x - eta * g).max(0.0))
                .collect();
            let mut tdeg = vec![0.0; n];
            for (&(i, j), &x) in d.pairs().iter().zip(&trial) {
                tdeg[i] += x;
                tdeg[j] += x;
            }
            if tdeg.iter().all(|&x| x > 0.0) {
                w = trial;
                break;
            }
            eta *= 0.5;
        }
    }
    w
}

#[test]
fn dense_form_matches_edge_form() {
    let d = random_full(6, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w: Vec<f64> = (0..d.len()).map(|_| rng.random_range(0.01..1.5)).collect();
    for (alpha, beta) in [(1.0, 1.0), (0.3, 2.5)] {
        let edge = objective(&w, &d, alpha, beta).unwrap();
        let dense = dense_objective(&d, &w, alpha, beta);
        assert!((edge - dense).abs() < 1e-12, "{edge} vs {dense}");
    }
}

#[test]
fn matches_projected_gradient_on_five_nodes() {
    let d = random_full(5, 11);
    let r = solve(&d, &SolverConfig::default()).unwrap();
    assert!(r.converged);
    let w_pg = projected_gradient_oracle(&d, 1.0, 1.0, 1_000_000);
    let f_pg = objective(&w_pg, &d, 1.0, 1.0).unwrap();
    let f = r.final_objective();
    assert!((f - f_pg).abs() <= 1e-6, "solver {f} oracle {f_pg}");
}

#[test]
fn scale_identity() {
    let d = random_points_support(30, 5, 5);
    for (alpha, beta) in [(2.0, 0.5), (0.1, 3.0), (4.0, 4.0)] {
        let r = solve(&d, &SolverConfig::with_alpha_beta(alpha, beta)).unwrap();
        let s = (alpha * beta).sqrt();
        let r1 = solve(&d.scaled(1.0 / s), &SolverConfig::default()).unwrap();
        let c = (alpha / beta).sqrt();
        for (a, b) in r.weights.iter().zip(&r1.weights) {
            assert!((a - c * b).abs() <= 1e-6, "{a} vs {}", c * b);
        }
    }
}

#[test]
fn primal_dual_agrees_with_coordinate_descent() {
    let d = random_points_support(25, 4, 9);
    let cd = solve(&d, &SolverConfig::default()).unwrap();
    let pd = solve(
        &d,
        &SolverConfig {
            scheme: Scheme::PrimalDual,
            max_iters: 200_000,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(cd.converged && pd.converged, "pd kkt {}", pd.kkt_residual);
    for (a, b) in cd.weights.iter().zip(&pd.weights) {
        assert!((a - b).abs() < 1e-5, "{a} vs {b}");
    }
}

#[test]
fn bipartite_reduces_to_general_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (nu, ni) = (3, 4);
    let mut pairs = Vec::new();
    let mut vals = Vec::new();
    for u in 0..nu {
        for i in 0..ni {
            pairs.push((u, nu + i));
            vals.push(rng.random_range(0.0..2.0));
        }
    }
    let d = DistanceMatrix::new(nu + ni, pairs.clone(), vals.clone()).unwrap();
    let rb = solve_bipartite(&d, nu, &SolverConfig::default()).unwrap();
    // Same instance built independently, with items listed first.
    let relabel = |x: usize| if x < nu { x + ni } else { x - nu };
    let mut swapped: Vec<((usize, usize), f64, usize)> = pairs
        .iter()
        .zip(&vals)
        .enumerate()
        .map(|(e, (&(a, b), &v))| {
            let (x, y) = (relabel(a), relabel(b));
            ((x.min(y), x.max(y)), v, e)
        })
        .collect();
    swapped.sort_by_key(|s| s.0);
    let d2 = DistanceMatrix::new(
        nu + ni,
        swapped.iter().map(|s| s.0).collect(),
        swapped.iter().map(|s| s.1).collect(),
    )
    .unwrap();
    let rg = solve(&d2, &SolverConfig::default()).unwrap();
    for (k, s) in swapped.iter().enumerate() {
        assert!((rg.weights[k] - rb.weights[s.2]).abs() < 1e-8);
    }
    assert!(rb.pairs.iter().all(|&(u, i)| u < nu && i >= nu));
}

#[test]
fn auto_density_monotone_in_theta() {
    let d = random_points_support(60, 8, 2);
    let mut last = usize::MAX;
    let mut theta = 1e-3;
    while theta < 1e3 {
        let r = solve(&d.scaled(theta), &SolverConfig::default()).unwrap();
        let count = r.present_edges();
        assert!(count <= last, "theta {theta}: {count} > {last}");
        last = count;
        theta *= 2.0;
    }
}

#[test]
fn auto_hits_target() {
    let d = random_points_support(200, 12, 4);
    let (r, theta) = solve_auto(&d, 6.0, &AutoConfig::default()).unwrap();
    assert!(r.converged);
    assert!(
        (r.mean_degree() - 6.0).abs() <= 0.6,
        "mean degree {}",
        r.mean_degree()
    );
    assert!(theta > 0.0);
}

#[test]
fn auto_near_complete_for_small_theta() {
    let d = random_points_support(40, 6, 8);
    let full = 2.0 * d.len() as f64 / 40.0;
    let (r, theta) = solve_auto(&d, full, &AutoConfig::default()).unwrap();
    assert!(r.mean_degree() >= 0.9 * full, "theta {theta}");
}

#[test]
fn auto_rejects_unreachable_target() {
    let d = random_points_support(20, 2, 1);
    assert!(solve_auto(&d, 50.0, &AutoConfig::default()).is_err());
    assert!(solve_auto(&d, 0.0, &AutoConfig::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn oracle_equivalence_small(n in 2usize..=6, seed in 0u64..10_000) {
        let d = random_full(n, seed);
        let r = solve(&d, &SolverConfig::default()).unwrap();
        let w_pg = projected_gradient_oracle(&d, 1.0, 1.0, 200_000);
        let f_pg = objective(&w_pg, &d, 1.0, 1.0).unwrap();
        prop_assert!((r.final_objective() - f_pg).abs() <= 1e-6);
    }

    #[test]
    fn result_invariants(n in 5usize..40, k in 1usize..5, seed in 0u64..10_000,
                         alpha in 0.1f64..5.0, beta in 0.1f64..5.0) {
        let d = random_points_support(n, k.min(n - 1), seed);
        let r = solve(&d, &SolverConfig::with_alpha_beta(alpha, beta)).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.weights.iter().all(|&w| w >= 0.0));
        prop_assert!(r.min_degree() > 0.0);
        prop_assert!(r.kkt_residual <= 1e-5);
        prop_assert!((kkt_residual(&r.weights, &d, alpha, beta) - r.kkt_residual).abs() < 1e-12);
        for t in 10..r.objective_trace.len() {
            prop_assert!(r.objective_trace[t] <= r.objective_trace[t - 1] + 1e-9);
        }
    }
}
