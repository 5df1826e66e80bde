//! BPR with a negative pool refined by a learned user-item graph.
//!
//! Uses a synthetic low-rank log by default, or any `user<TAB>item[<TAB>rating]`
//! file:
//!
//! ```text
//! cargo run --release --example recommendation -- [path/to/u.data]
//! ```

use std::path::PathBuf;

use structlearn::data::{load_interactions, split_interactions, synthetic, InteractionOptions};
use structlearn::pipelines::{drop_sparse_users, run_brec, BrecConfig, MIN_USER_INTERACTIONS};

fn main() -> structlearn::Result<()> {
    let ds = match std::env::args().nth(1).map(PathBuf::from) {
        Some(path) => load_interactions(
            &path,
            &InteractionOptions {
                min_rating: Some(4.0),
                ..InteractionOptions::new(10, 10)
            },
        )?,
        None => synthetic::latent_interactions(300, 400, 8, 40, 0)?,
    };
    let (graph, excluded) = drop_sparse_users(&ds.graph, MIN_USER_INTERACTIONS)?;
    println!(
        "{} users, {} items, {} interactions ({} users excluded)",
        graph.n_users(),
        graph.n_items(),
        graph.n_interactions(),
        excluded.len()
    );
    let split = split_interactions(&graph, 0)?;

    let mut cfg = BrecConfig::default();
    cfg.bpr.epochs = 300;
    cfg.continuation_epochs = 300;
    let r = run_brec(&split, &cfg, 0)?;

    println!("fraction  removed  overlap  bound   val R@20  test R@20");
    for arm in std::iter::once(&r.baseline).chain(&r.arms) {
        println!(
            "{:>8.2}  {:>7}  {:>7.4}  {:>6.4}  {:>8.4}  {:>9.4}",
            arm.fraction,
            arm.removed,
            arm.pool_overlap,
            arm.random_overlap_bound,
            arm.val_recall_at_20,
            arm.recall_at[&20]
        );
    }
    println!(
        "selected fraction {}: recall@20 {:.4} vs baseline {:.4}",
        r.selected_fraction,
        r.selected_arm().recall_at[&20],
        r.baseline.recall_at[&20]
    );
    Ok(())
}
