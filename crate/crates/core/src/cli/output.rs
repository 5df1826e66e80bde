//! Ledger, summary, plot-data and config-echo files.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::metrics::{mean_std, wilcoxon_signed_rank};

pub const LEDGER_FILE: &str = "ledger.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const PLOT_FILE: &str = "plot.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub task: String,
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub metric: String,
    pub value: f64,
}

impl LedgerRow {
    pub fn new(
        task: &str,
        dataset: &str,
        method: &str,
        seed: u64,
        metric: &str,
        value: f64,
    ) -> Self {
        LedgerRow {
            task: task.into(),
            dataset: dataset.into(),
            method: method.into(),
            seed,
            metric: metric.into(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonEntry {
    pub metric: String,
    pub method: String,
    pub baseline: String,
    pub n_pairs: usize,
    pub mean_diff: f64,
    /// `None` with fewer than six non-zero paired differences.
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub dataset: String,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
    pub wilcoxon: Vec<WilcoxonEntry>,
    pub failures: Vec<TrialFailure>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("{}: {e}", path.display()))
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_ledger(path: &Path, rows: &[LedgerRow]) -> Result<(), CliError> {
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(fresh)
        .from_writer(file);
    for r in rows {
        w.serialize(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Rows of `series,x_name,x,value`.
pub fn write_plot(path: &Path, rows: &[(String, &str, f64, f64)]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(["series", "x_name", "x", "value"])
        .map_err(|e| io_err(path, e))?;
    for (series, x_name, x, v) in rows {
        w.write_record([series.as_str(), x_name, &x.to_string(), &v.to_string()])
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Per (method, metric) mean and standard error, plus paired Wilcoxon tests
/// of every other method against `baseline` on shared seeds.
pub fn summarize(
    rows: &[LedgerRow],
    baseline: Option<&str>,
) -> (Vec<MethodSummary>, Vec<WilcoxonEntry>) {
    let mut groups: BTreeMap<(String, String), BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.value.is_finite()) {
        groups
            .entry((r.method.clone(), r.metric.clone()))
            .or_default()
            .insert(r.seed, r.value);
    }
    let methods = groups
        .iter()
        .map(|((method, metric), by_seed)| {
            let v: Vec<f64> = by_seed.values().copied().collect();
            let (mean, std) = mean_std(&v);
            MethodSummary {
                method: method.clone(),
                metric: metric.clone(),
                n: v.len(),
                mean,
                std_err: if v.len() > 1 {
                    std / (v.len() as f64).sqrt()
                } else {
                    0.0
                },
            }
        })
        .collect();
    let mut tests = Vec::new();
    if let Some(base) = baseline {
        for ((method, metric), by_seed) in &groups {
            if method == base {
                continue;
            }
            let Some(base_vals) = groups.get(&(base.to_string(), metric.clone())) else {
                continue;
            };
            let diffs: Vec<f64> = by_seed
                .iter()
                .filter_map(|(s, v)| base_vals.get(s).map(|b| v - b))
                .collect();
            if diffs.is_empty() {
                continue;
            }
            tests.push(WilcoxonEntry {
                metric: metric.clone(),
                method: method.clone(),
                baseline: base.to_string(),
                n_pairs: diffs.len(),
                mean_diff: diffs.iter().sum::<f64>() / diffs.len() as f64,
                p_value: wilcoxon_signed_rank(&diffs).ok(),
            });
        }
    }
    (methods, tests)
}
