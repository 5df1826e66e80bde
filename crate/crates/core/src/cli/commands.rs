use std::io::BufRead;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{
    LearnGraphConfig, LinkPredictConfig, NodeClassifyConfig, RecommendConfig, TrialConfig,
};
use super::output::{
    append_ledger, summarize, write_json, write_plot, LedgerRow, Summary, TrialFailure,
    CONFIG_FILE, LEDGER_FILE, PLOT_FILE, SUMMARY_FILE,
};
use super::{CliError, LearnGraphArgs, LinkPredictArgs, NodeClassifyArgs, RecommendArgs};
use crate::data::{
    citation_paths, data_dir, load_citation, load_interactions, movielens_100k_path,
    split_interactions, split_labels, split_links, synthetic, CitationDataset, InteractionOptions,
    DATA_DIR_ENV,
};
use crate::distance::{embedding_sq_euclidean, DistanceMatrix};
use crate::neighbors::{approx_knn, exact_knn};
use crate::pipelines::{drop_sparse_users, run_bgcn, run_brec, run_bvgae, MIN_USER_INTERACTIONS};
use crate::solver::{solve, solve_auto, AutoConfig, SolverConfig};

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn read_embeddings(path: &Path) -> Result<Array2<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let parsed: Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if k == 0 => continue,
            Err(e) => return Err(usage(format!("{}:{}: {e}", path.display(), k + 1))),
        }
    }
    let dim = rows
        .first()
        .map(Vec::len)
        .ok_or_else(|| usage(format!("{}: no rows", path.display())))?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / dim, dim), flat).map_err(|e| usage(e.to_string()))
}

/// `#nodes=N` header and `i<TAB>j<TAB>d` lines; zero distances are kept.
fn read_distances(path: &Path) -> Result<DistanceMatrix, CliError> {
    let file = std::fs::File::open(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let mut n = None;
    let (mut pairs, mut values) = (Vec::new(), Vec::new());
    for (k, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| usage(e.to_string()))?;
        let line = line.trim();
        let bad = |m: &str| usage(format!("{}:{}: {m}", path.display(), k + 1));
        if let Some(rest) = line.strip_prefix("#nodes=") {
            n = Some(
                rest.trim()
                    .parse::<usize>()
                    .map_err(|_| bad("bad node count"))?,
            );
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad("expected i, j, distance"));
        }
        let i: usize = f[0].parse().map_err(|_| bad("bad node index"))?;
        let j: usize = f[1].parse().map_err(|_| bad("bad node index"))?;
        let d: f64 = f[2].parse().map_err(|_| bad("bad distance"))?;
        pairs.push((i.min(j), i.max(j)));
        values.push(d);
    }
    let n = n.ok_or_else(|| usage(format!("{}: missing #nodes= header", path.display())))?;
    Ok(DistanceMatrix::new(n, pairs, values)?)
}

pub(crate) fn learn_graph(a: LearnGraphArgs) -> Result<(), CliError> {
    let cfg = LearnGraphConfig::resolve(&a)?;
    let d = match (&cfg.embeddings, &cfg.distances) {
        (Some(path), _) => {
            let z = read_embeddings(path)?;
            if cfg.k == 0 || cfg.k >= z.nrows() {
                return Err(usage(format!("--k must be in 1..{}", z.nrows())));
            }
            let support = if cfg.approximate {
                approx_knn(z.view(), cfg.k, cfg.ef)?
            } else {
                exact_knn(z.view(), cfg.k)?
            };
            embedding_sq_euclidean(z.view(), &support.pairs)?
        }
        (None, Some(path)) => read_distances(path)?,
        (None, None) => unreachable!("validated in resolve"),
    };
    let solver = SolverConfig {
        max_iters: cfg.max_iters,
        ..SolverConfig::default()
    };
    let (result, alpha, beta, theta) = match (cfg.alpha, cfg.beta) {
        (Some(alpha), Some(beta)) => {
            let r = solve(
                &d,
                &SolverConfig {
                    alpha,
                    beta,
                    ..solver
                },
            )?;
            (r, alpha, beta, None)
        }
        _ => {
            let auto = AutoConfig {
                solver,
                ..AutoConfig::default()
            };
            let (r, theta) = solve_auto(&d, cfg.target_degree, &auto)?;
            (r, 1.0, 1.0, Some(theta))
        }
    };
    let sidecar = result.sidecar(alpha, beta, theta);
    result.to_graph().write_edge_list(&cfg.out)?;
    sidecar.write(&cfg.out.with_extension("json"))?;
    write_json(&cfg.out.with_extension("config.json"), &cfg)?;
    println!(
        "nodes {} present edges {} density {:.6} mean degree {:.4} min degree {:.6e} kkt {:.3e} converged {}",
        sidecar.n_nodes,
        sidecar.n_present,
        result.density(),
        sidecar.mean_degree,
        sidecar.min_degree,
        sidecar.kkt_residual,
        sidecar.converged
    );
    if !result.converged && !cfg.allow_nonconverged {
        return Err(CliError::Numerical(format!(
            "solver did not converge (kkt {:.3e}); rerun with --allow-nonconverged to accept",
            result.kkt_residual
        )));
    }
    Ok(())
}

fn citation_dataset(
    name: &str,
    content: Option<&Path>,
    cites: Option<&Path>,
) -> Result<CitationDataset, CliError> {
    if let (Some(c), Some(e)) = (content, cites) {
        return Ok(load_citation(c, e)?);
    }
    if content.is_some() != cites.is_some() {
        return Err(usage("--content and --cites must be given together"));
    }
    if name == "synthetic" {
        return Ok(synthetic::planted_partition(&Default::default(), 0)?);
    }
    let root = data_dir()
        .ok_or_else(|| usage(format!("set {DATA_DIR_ENV} or pass --content and --cites")))?;
    let (c, e) = citation_paths(&root, name);
    Ok(load_citation(&c, &e)?)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| usage(e.to_string()))
}

/// Runs one closure per seed in the worker pool; results keep seed order.
fn run_trials<T, F>(trial: &TrialConfig, f: F) -> Result<Vec<(u64, crate::Result<T>)>, CliError>
where
    T: Send,
    F: Fn(u64) -> crate::Result<T> + Sync,
{
    let seeds = trial.seeds();
    Ok(pool(trial.jobs)?.install(|| seeds.par_iter().map(|&s| (s, f(s))).collect()))
}

struct Collected {
    rows: Vec<LedgerRow>,
    plot: Vec<(String, &'static str, f64, f64)>,
    failures: Vec<TrialFailure>,
}

#[derive(Serialize)]
struct ConfigEcho<'a, C: Serialize, P: Serialize> {
    command: &'a str,
    config: &'a C,
    pipeline: &'a P,
}

fn finish<C: Serialize, P: Serialize>(
    task: &str,
    trial: &TrialConfig,
    config: &C,
    pipeline: &P,
    baseline: &str,
    c: Collected,
) -> Result<(), CliError> {
    let dir = &trial.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    write_json(
        &dir.join(CONFIG_FILE),
        &ConfigEcho {
            command: task,
            config,
            pipeline,
        },
    )?;
    append_ledger(&dir.join(LEDGER_FILE), &c.rows)?;
    write_plot(&dir.join(PLOT_FILE), &c.plot)?;
    let (methods, wilcoxon) = summarize(&c.rows, Some(baseline));
    for m in &methods {
        println!(
            "{task} {} {} {}: {:.4} ± {:.4} (n={})",
            trial.dataset, m.method, m.metric, m.mean, m.std_err, m.n
        );
    }
    for w in &wilcoxon {
        match w.p_value {
            Some(p) => println!(
                "  {} vs {} on {}: mean diff {:+.4}, p = {p:.4}",
                w.method, w.baseline, w.metric, w.mean_diff
            ),
            None => println!(
                "  {} vs {} on {}: mean diff {:+.4}, too few pairs for a p-value",
                w.method, w.baseline, w.metric, w.mean_diff
            ),
        }
    }
    let n_failed = c.failures.len();
    for f in &c.failures {
        eprintln!("trial {} failed: {}", f.seed, f.error);
    }
    write_json(
        &dir.join(SUMMARY_FILE),
        &Summary {
            task: task.into(),
            dataset: trial.dataset.clone(),
            seeds: trial.seeds(),
            methods,
            wilcoxon,
            failures: c.failures,
        },
    )?;
    if n_failed == trial.trials {
        return Err(CliError::Numerical("every trial failed".into()));
    }
    Ok(())
}

fn collect<T>(
    task: &str,
    dataset: &str,
    failed_method: &str,
    results: Vec<(u64, crate::Result<T>)>,
    mut record: impl FnMut(u64, T, &mut Collected),
) -> Collected {
    let mut c = Collected {
        rows: Vec::new(),
        plot: Vec::new(),
        failures: Vec::new(),
    };
    for (seed, r) in results {
        match r {
            Ok(v) => record(seed, v, &mut c),
            Err(e) => {
                c.rows.push(LedgerRow::new(
                    task,
                    dataset,
                    failed_method,
                    seed,
                    "failed",
                    f64::NAN,
                ));
                c.failures.push(TrialFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    c
}

fn trial_dir(out: &Path) -> Result<PathBuf, CliError> {
    let dir = out.join("trials");
    std::fs::create_dir_all(&dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn node_classify(a: NodeClassifyArgs) -> Result<(), CliError> {
    let cfg = NodeClassifyConfig::resolve(&a)?;
    let p = cfg.pipeline();
    let ds = citation_dataset(
        &cfg.trial.dataset,
        cfg.content.as_deref(),
        cfg.cites.as_deref(),
    )?;
    let trials = trial_dir(&cfg.trial.out_dir)?;
    let results = run_trials(&cfg.trial, |seed| {
        let split = split_labels(
            &ds.labels,
            ds.n_classes(),
            cfg.labels_per_class,
            cfg.val_size,
            seed,
        )?;
        let report = run_bgcn(&ds, &split, &p, seed)?;
        let path = trials.join(format!("node-classify-{seed}.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(&report)?)
            .map_err(|e| crate::Error::Io { path, source: e })?;
        Ok(report)
    })?;
    let (task, dataset) = ("node-classify", cfg.trial.dataset.as_str());
    let c = collect(task, dataset, "bgcn", results, |seed, r, c| {
        c.rows.push(LedgerRow::new(
            task, dataset, "bgcn", seed, "accuracy", r.accuracy,
        ));
        c.plot
            .push(("bgcn:accuracy".into(), "trial", seed as f64, r.accuracy));
        if cfg.baseline_also {
            c.rows.push(LedgerRow::new(
                task,
                dataset,
                "gcn",
                seed,
                "accuracy",
                r.baseline_accuracy,
            ));
            c.plot.push((
                "gcn:accuracy".into(),
                "trial",
                seed as f64,
                r.baseline_accuracy,
            ));
        }
    });
    finish(task, &cfg.trial, &cfg, &p, "gcn", c)
}

pub(crate) fn link_predict(a: LinkPredictArgs) -> Result<(), CliError> {
    let cfg = LinkPredictConfig::resolve(&a)?;
    let p = cfg.pipeline();
    let ds = citation_dataset(
        &cfg.trial.dataset,
        cfg.content.as_deref(),
        cfg.cites.as_deref(),
    )?;
    let trials = trial_dir(&cfg.trial.out_dir)?;
    let results = run_trials(&cfg.trial, |seed| {
        let split = split_links(&ds.graph, 0.05, 0.10, seed)?;
        let report = run_bvgae(&ds, &split, &p, seed)?;
        let path = trials.join(format!("link-predict-{seed}.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(&report)?)
            .map_err(|e| crate::Error::Io { path, source: e })?;
        Ok(report)
    })?;
    let (task, dataset) = ("link-predict", cfg.trial.dataset.as_str());
    let c = collect(task, dataset, "bvgae", results, |seed, r, c| {
        for (method, rep) in [("vgae", &r.baseline), ("bvgae", &r.bvgae)] {
            c.rows
                .push(LedgerRow::new(task, dataset, method, seed, "auc", rep.auc));
            c.rows
                .push(LedgerRow::new(task, dataset, method, seed, "ap", rep.ap));
            c.plot
                .push((format!("{method}:auc"), "trial", seed as f64, rep.auc));
            c.plot
                .push((format!("{method}:ap"), "trial", seed as f64, rep.ap));
        }
    });
    finish(task, &cfg.trial, &cfg, &p, "vgae", c)
}

pub(crate) fn recommend(a: RecommendArgs) -> Result<(), CliError> {
    let mut cfg = RecommendConfig::resolve(&a)?;
    let ds = match (&cfg.interactions, cfg.trial.dataset.as_str()) {
        (None, "synthetic") => synthetic::latent_interactions(300, 400, 8, 40, 0)?,
        (path, name) => {
            let path = match path {
                Some(p) => p.clone(),
                None if name == "ml100k" => {
                    cfg.min_rating = cfg.min_rating.or(Some(4.0));
                    let root = data_dir().ok_or_else(|| {
                        usage(format!("set {DATA_DIR_ENV} or pass --interactions"))
                    })?;
                    movielens_100k_path(&root)
                }
                None => {
                    return Err(usage(format!(
                        "unknown dataset {name:?}; pass --interactions"
                    )))
                }
            };
            let opts = InteractionOptions {
                th1: cfg.th1,
                th2: cfg.th2,
                min_rating: cfg.min_rating,
            };
            load_interactions(&path, &opts)?
        }
    };
    let p = cfg.pipeline();
    println!(
        "{}: {} users, {} items, {} interactions",
        cfg.trial.dataset,
        ds.graph.n_users(),
        ds.graph.n_items(),
        ds.graph.n_interactions()
    );
    let (graph, excluded) = drop_sparse_users(&ds.graph, MIN_USER_INTERACTIONS)?;
    if !excluded.is_empty() {
        log::warn!(
            "excluded {} users with fewer than {MIN_USER_INTERACTIONS} interactions",
            excluded.len()
        );
    }
    let trials = trial_dir(&cfg.trial.out_dir)?;
    let results = run_trials(&cfg.trial, |seed| {
        let split = split_interactions(&graph, seed)?;
        let report = run_brec(&split, &p, seed)?;
        let path = trials.join(format!("recommend-{seed}.json"));
        std::fs::write(&path, serde_json::to_vec_pretty(&report)?)
            .map_err(|e| crate::Error::Io { path, source: e })?;
        Ok(report)
    })?;
    let (task, dataset) = ("recommend", cfg.trial.dataset.as_str());
    let c = collect(task, dataset, "bpr-refined", results, |seed, r, c| {
        for (method, rep) in [("bpr", &r.baseline), ("bpr-refined", r.selected_arm())] {
            for (k, v) in &rep.recall_at {
                c.rows.push(LedgerRow::new(
                    task,
                    dataset,
                    method,
                    seed,
                    &format!("recall@{k}"),
                    *v,
                ));
            }
            for (k, v) in &rep.ndcg_at {
                c.rows.push(LedgerRow::new(
                    task,
                    dataset,
                    method,
                    seed,
                    &format!("ndcg@{k}"),
                    *v,
                ));
            }
        }
        let sel = r.selected_arm();
        c.rows.push(LedgerRow::new(
            task,
            dataset,
            "bpr-refined",
            seed,
            "fraction",
            sel.fraction,
        ));
        c.rows.push(LedgerRow::new(
            task,
            dataset,
            "bpr-refined",
            seed,
            "pool_overlap",
            sel.pool_overlap,
        ));
        c.rows.push(LedgerRow::new(
            task,
            dataset,
            "bpr-refined",
            seed,
            "random_overlap_bound",
            sel.random_overlap_bound,
        ));
        for arm in &r.arms {
            c.plot.push((
                format!("seed{seed}:val_recall@20"),
                "fraction",
                arm.fraction,
                arm.val_recall_at_20,
            ));
            if let Some(v) = arm.recall_at.get(&20) {
                c.plot.push((
                    format!("seed{seed}:test_recall@20"),
                    "fraction",
                    arm.fraction,
                    *v,
                ));
            }
            c.plot.push((
                format!("seed{seed}:pool_overlap"),
                "fraction",
                arm.fraction,
                arm.pool_overlap,
            ));
        }
    });
    finish(task, &cfg.trial, &cfg, &p, "bpr", c)
}
