//! Approximate k-NN support against exact search, with timings.
//!
//! ```text
//! cargo run --release --example approximate_neighbors -- [n_points] [k] [ef]
//! ```

use std::time::Instant;

use structlearn::data::synthetic::gaussian_points;
use structlearn::neighbors::{approx_knn, exact_knn, support_recall};

fn main() -> structlearn::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(5000, |s| s.parse().expect("n_points"));
    let k: usize = args.next().map_or(10, |s| s.parse().expect("k"));
    let ef: usize = args.next().map_or(64, |s| s.parse().expect("ef"));

    let points = gaussian_points(n, 8, 3);

    let t = Instant::now();
    let approx = approx_knn(points.view(), k, ef)?;
    let t_approx = t.elapsed();

    let t = Instant::now();
    let exact = exact_knn(points.view(), k)?;
    let t_exact = t.elapsed();

    println!("approximate: {} pairs in {t_approx:.2?}", approx.len());
    println!("exact:       {} pairs in {t_exact:.2?}", exact.len());
    println!("recall vs exact: {:.4}", support_recall(&approx, &exact));
    if let Some(r) = approx.recall_estimate {
        println!("sampled recall estimate: {r:.4}");
    }
    Ok(())
}
