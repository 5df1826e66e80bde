//! Learns a sparse graph over a Gaussian point cloud.
//!
//! ```text
//! cargo run --release --example learn_graph -- [n_points] [target_degree]
//! ```

use structlearn::data::synthetic::gaussian_points;
use structlearn::distance::embedding_sq_euclidean;
use structlearn::neighbors::exact_knn;
use structlearn::solver::{solve, solve_auto, AutoConfig, Scheme, SolverConfig};

fn main() -> structlearn::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(500, |s| s.parse().expect("n_points"));
    let target: f64 = args
        .next()
        .map_or(8.0, |s| s.parse().expect("target_degree"));

    let points = gaussian_points(n, 4, 7);
    let support = exact_knn(points.view(), 20)?;
    let d = embedding_sq_euclidean(points.view(), &support.pairs)?;
    println!("{n} points, {} candidate pairs", d.len());

    let (g, theta) = solve_auto(&d, target, &AutoConfig::default())?;
    println!(
        "theta {theta:.4}: {} present edges, mean degree {:.2}, min degree {:.3e}, kkt {:.2e}, {} sweeps",
        g.present_edges(),
        g.mean_degree(),
        g.min_degree(),
        g.kkt_residual,
        g.iterations
    );

    // Fixed alpha/beta, solved by both schemes.
    let cfg = SolverConfig::with_alpha_beta(1.0, 1.0);
    let cd = solve(&d, &cfg)?;
    let pd = solve(
        &d,
        &SolverConfig {
            scheme: Scheme::PrimalDual,
            ..cfg
        },
    )?;
    let gap = cd.final_objective() - pd.final_objective();
    println!(
        "alpha = beta = 1: objective {:.6} (coordinate) vs {:.6} (primal-dual), gap {gap:.2e}",
        cd.final_objective(),
        pd.final_objective()
    );

    let first = cd.to_graph().to_edge_list_string();
    for line in first.lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
