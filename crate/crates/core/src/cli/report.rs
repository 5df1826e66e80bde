use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::output::{summarize, LedgerRow};
use super::{CliError, ReportArgs};

const BASELINES: [&str; 3] = ["gcn", "vgae", "bpr"];

/// Reads ledger rows, skipping malformed ones. Returns the rows and the
/// number skipped.
pub(crate) fn read_ledger(path: &std::path::Path) -> Result<(Vec<LedgerRow>, usize), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let (mut rows, mut skipped) = (Vec::new(), 0);
    for rec in reader.deserialize::<LedgerRow>() {
        match rec {
            Ok(r) => rows.push(r),
            Err(_) => skipped += 1,
        }
    }
    Ok((rows, skipped))
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        Some(p) if p < 1e-3 => format!("{p:.1e}"),
        Some(p) => format!("{p:.3}"),
        None => "n/a".into(),
    }
}

pub(crate) fn report(a: ReportArgs) -> Result<(), CliError> {
    let (rows, skipped) = read_ledger(&a.ledger)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} malformed ledger rows");
        eprintln!("warning: skipped {skipped} malformed ledger rows");
    }
    if rows.is_empty() {
        return Err(CliError::Usage(format!(
            "{}: no ledger rows",
            a.ledger.display()
        )));
    }
    let mut groups: BTreeMap<(String, String), Vec<LedgerRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.task.clone(), r.dataset.clone()))
            .or_default()
            .push(r);
    }
    let mut md = String::new();
    let mut csv_out = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Usage(e.to_string());
    csv_out
        .write_record([
            "task", "dataset", "method", "metric", "n", "mean", "std_err", "baseline", "p_value",
        ])
        .map_err(csv_err)?;
    for ((task, dataset), rows) in &groups {
        let methods: BTreeSet<&str> = rows.iter().map(|r| r.method.as_str()).collect();
        let baseline = BASELINES
            .iter()
            .copied()
            .find(|b| methods.contains(b))
            .or_else(|| methods.iter().next().copied());
        let (summary, tests) = summarize(rows, baseline);
        let metrics: BTreeSet<&str> = summary.iter().map(|s| s.metric.as_str()).collect();
        let tested: BTreeSet<&str> = tests.iter().map(|t| t.metric.as_str()).collect();
        let _ = writeln!(md, "## {task} / {dataset}\n");
        let mut header = String::from("| method |");
        for m in &metrics {
            let _ = write!(header, " {m} |");
        }
        for m in &tested {
            let _ = write!(header, " p({m}) |");
        }
        let cols = metrics.len() + tested.len();
        let _ = writeln!(md, "{header}\n|---|{}", "---|".repeat(cols));
        for method in &methods {
            let mut line = format!("| {method} |");
            for m in &metrics {
                match summary
                    .iter()
                    .find(|s| s.method == *method && s.metric == *m)
                {
                    Some(s) => {
                        let _ = write!(line, " {:.4} ± {:.4} (n={}) |", s.mean, s.std_err, s.n);
                    }
                    None => line.push_str(" |"),
                }
            }
            for m in &tested {
                match tests.iter().find(|t| t.method == *method && t.metric == *m) {
                    Some(t) => {
                        let _ = write!(line, " {} |", fmt_p(t.p_value));
                    }
                    None => line.push_str(" |"),
                }
            }
            let _ = writeln!(md, "{line}");
        }
        md.push('\n');
        for s in &summary {
            let p = tests
                .iter()
                .find(|t| t.method == s.method && t.metric == s.metric)
                .and_then(|t| t.p_value);
            csv_out
                .write_record([
                    task.as_str(),
                    dataset.as_str(),
                    &s.method,
                    &s.metric,
                    &s.n.to_string(),
                    &s.mean.to_string(),
                    &s.std_err.to_string(),
                    baseline.unwrap_or(""),
                    &p.map(|v| v.to_string()).unwrap_or_default(),
                ])
                .map_err(csv_err)?;
        }
    }
    let csv_bytes = csv_out
        .into_inner()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    match &a.out {
        Some(path) => std::fs::write(path, &md)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => print!("{md}"),
    }
    if let Some(path) = &a.csv {
        std::fs::write(path, csv_bytes)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}
