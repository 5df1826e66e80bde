//! GCN baseline versus GCN on a learned graph with MC-dropout averaging.
//!
//! Runs on a planted-partition corpus by default. With `STRUCTLEARN_DATA_DIR`
//! set, pass a corpus name:
//!
//! ```text
//! cargo run --release --example node_classification -- [cora|citeseer] [labels_per_class] [trials]
//! ```

use structlearn::data::{
    citation_paths, data_dir, load_citation, split_labels, synthetic, DEFAULT_VAL_NODES,
};
use structlearn::metrics::{mean_std, wilcoxon_signed_rank};
use structlearn::pipelines::{run_bgcn, BgcnConfig};

fn main() -> structlearn::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "synthetic".into());
    let per_class: usize = args
        .next()
        .map_or(5, |s| s.parse().expect("labels_per_class"));
    let trials: u64 = args.next().map_or(6, |s| s.parse().expect("trials"));

    let (ds, val_size) = if name == "synthetic" {
        (synthetic::planted_partition(&Default::default(), 0)?, 100)
    } else {
        let root = data_dir().expect("STRUCTLEARN_DATA_DIR is not set");
        let (content, cites) = citation_paths(&root, &name);
        (load_citation(&content, &cites)?, DEFAULT_VAL_NODES)
    };
    println!(
        "{name}: {} nodes, {} edges, {} classes, {} features",
        ds.n_nodes(),
        ds.graph.n_edges(),
        ds.n_classes(),
        ds.n_features()
    );

    let cfg = BgcnConfig::default();
    let (mut base, mut learned) = (Vec::new(), Vec::new());
    for seed in 0..trials {
        let split = split_labels(&ds.labels, ds.n_classes(), per_class, val_size, seed)?;
        let r = run_bgcn(&ds, &split, &cfg, seed)?;
        let g = r.graph.as_ref().expect("graph learning enabled");
        println!(
            "seed {seed}: gcn {:.4}  learned graph {:.4}  (mean degree {:.2}, delta {:.3})",
            r.baseline_accuracy,
            r.accuracy,
            g.mean_degree,
            r.delta_used.unwrap_or(0.0)
        );
        base.push(r.baseline_accuracy);
        learned.push(r.accuracy);
    }
    let (mb, sb) = mean_std(&base);
    let (ml, sl) = mean_std(&learned);
    println!("gcn {mb:.4} ± {sb:.4}, learned graph {ml:.4} ± {sl:.4}");
    let diffs: Vec<f64> = learned.iter().zip(&base).map(|(a, b)| a - b).collect();
    match wilcoxon_signed_rank(&diffs) {
        Ok(p) => println!("Wilcoxon p = {p:.4}"),
        Err(e) => println!("no p-value: {e}"),
    }
    Ok(())
}
