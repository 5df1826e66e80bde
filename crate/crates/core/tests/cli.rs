use std::path::Path;
use std::process::ExitCode;

use structlearn::cli::run;

fn cli(args: &[&str]) -> ExitCode {
    run(std::iter::once("structlearn").chain(args.iter().copied()))
}

fn code(c: ExitCode) -> String {
    format!("{c:?}")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn learn_graph_from_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("emb.csv");
    let mut text = String::from("x,y\n");
    for i in 0..40 {
        let t = i as f64 * 0.37;
        text.push_str(&format!(
            "{},{}\n",
            t.cos() * (1.0 + i as f64 / 40.0),
            t.sin()
        ));
    }
    std::fs::write(&emb, text).unwrap();
    let out = dir.path().join("g.tsv");
    let rc = cli(&[
        "learn-graph",
        "--embeddings",
        path(&emb),
        "--k",
        "6",
        "--target-degree",
        "4",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(rc), code(ExitCode::SUCCESS));
    let g = structlearn::graph::WeightedGraph::read_edge_list(&out).unwrap();
    assert_eq!(g.n_nodes(), 40);
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("g.json")).unwrap()).unwrap();
    assert_eq!(sidecar["converged"], true);

    let rc = cli(&[
        "learn-graph",
        "--embeddings",
        path(&emb),
        "--k",
        "6",
        "--alpha",
        "1",
        "--beta",
        "1",
        "--max-iters",
        "1",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(rc), code(ExitCode::from(3)));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(
        code(cli(&["learn-graph", "--embeddings", path(&missing)])),
        code(ExitCode::from(2))
    );
    assert_eq!(
        code(cli(&["node-classify", "--trials", "0"])),
        code(ExitCode::from(2))
    );
    assert_eq!(
        code(cli(&["report", path(&missing)])),
        code(ExitCode::from(2))
    );
    assert_eq!(code(cli(&["no-such-command"])), code(ExitCode::from(2)));
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"not_a_key": 1}"#).unwrap();
    assert_eq!(
        code(cli(&["link-predict", "--config", path(&cfg)])),
        code(ExitCode::from(2))
    );
}

fn node_classify(out: &Path) -> ExitCode {
    cli(&[
        "node-classify",
        "--dataset",
        "synthetic",
        "--trials",
        "2",
        "--epochs",
        "60",
        "--vgae-epochs",
        "40",
        "--mc-samples",
        "4",
        "--deterministic",
        "--jobs",
        "2",
        "--baseline-also",
        "--out-dir",
        path(out),
    ])
}

#[test]
fn node_classify_is_reproducible_and_reportable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(node_classify(&a)), code(ExitCode::SUCCESS));
    assert_eq!(code(node_classify(&b)), code(ExitCode::SUCCESS));
    let la = std::fs::read_to_string(a.join("ledger.csv")).unwrap();
    assert_eq!(la, std::fs::read_to_string(b.join("ledger.csv")).unwrap());
    assert!(la.lines().any(|l| l.contains(",gcn,")) && la.lines().any(|l| l.contains(",bgcn,")));
    for f in ["summary.json", "config.json", "plot.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);

    let md = dir.path().join("report.md");
    let csv = dir.path().join("report.csv");
    let rc = cli(&[
        "report",
        path(&a.join("ledger.csv")),
        "--out",
        path(&md),
        "--csv",
        path(&csv),
    ]);
    assert_eq!(code(rc), code(ExitCode::SUCCESS));
    let text = std::fs::read_to_string(md).unwrap();
    assert!(text.contains("node-classify") && text.contains("bgcn"));
}

#[test]
fn report_skips_malformed_rows() {
    let dir = tempfile::tempdir().unwrap();
    let ledger = dir.path().join("ledger.csv");
    let mut text = String::from("task,dataset,method,seed,metric,value\n");
    for seed in 0..6 {
        text.push_str(&format!("t,d,bpr,{seed},recall@20,0.{}\n", 30 + seed));
        text.push_str(&format!(
            "t,d,bpr-refined,{seed},recall@20,0.{}\n",
            40 + seed
        ));
    }
    text.push_str("garbage\n");
    std::fs::write(&ledger, text).unwrap();
    let csv = dir.path().join("r.csv");
    let md = dir.path().join("r.md");
    assert_eq!(
        code(cli(&[
            "report",
            path(&ledger),
            "--out",
            path(&md),
            "--csv",
            path(&csv)
        ])),
        code(ExitCode::SUCCESS)
    );
    let out = std::fs::read_to_string(csv).unwrap();
    let row = out.lines().find(|l| l.contains("bpr-refined")).unwrap();
    let diffs: Vec<f64> = (0..6)
        .map(|s| {
            format!("0.{}", 40 + s).parse::<f64>().unwrap()
                - format!("0.{}", 30 + s).parse::<f64>().unwrap()
        })
        .collect();
    let p = structlearn::metrics::wilcoxon_signed_rank(&diffs).unwrap();
    assert!(row.ends_with(&format!(",bpr,{p}")), "{row}");
}
