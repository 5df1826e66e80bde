//! VGAE link prediction before and after grafting a learned graph.
//!
//! ```text
//! cargo run --release --example link_prediction -- [cora|citeseer] [trials]
//! ```

use structlearn::data::{citation_paths, data_dir, load_citation, split_links, synthetic};
use structlearn::pipelines::{run_bvgae, BvgaeConfig};

fn main() -> structlearn::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "synthetic".into());
    let trials: u64 = args.next().map_or(3, |s| s.parse().expect("trials"));

    let ds = if name == "synthetic" {
        synthetic::planted_partition(&Default::default(), 0)?
    } else {
        let root = data_dir().expect("STRUCTLEARN_DATA_DIR is not set");
        let (content, cites) = citation_paths(&root, &name);
        load_citation(&content, &cites)?
    };

    let cfg = BvgaeConfig::default();
    let mut wins = 0;
    for seed in 0..trials {
        let split = split_links(&ds.graph, 0.05, 0.10, seed)?;
        let r = run_bvgae(&ds, &split, &cfg, seed)?;
        println!(
            "seed {seed}: {} test edges | vgae auc {:.4} ap {:.4} | grafted auc {:.4} ap {:.4}",
            split.test_edges.len(),
            r.baseline.auc,
            r.baseline.ap,
            r.bvgae.auc,
            r.bvgae.ap
        );
        if r.bvgae.auc >= r.baseline.auc {
            wins += 1;
        }
    }
    println!("grafted graph at least as good in {wins}/{trials} trials");
    Ok(())
}
