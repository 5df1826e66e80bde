//! Implicit-feedback interaction logs.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionOptions {
    /// Users with fewer interactions are dropped first.
    pub th1: usize,
    /// Then items with fewer remaining interactions.
    pub th2: usize,
    /// Ratings below this are discarded before thresholding; `None` keeps all.
    pub min_rating: Option<f64>,
}

impl InteractionOptions {
    pub fn new(th1: usize, th2: usize) -> Self {
        InteractionOptions {
            th1,
            th2,
            min_rating: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    /// Binary interactions over dense user and item indices.
    pub graph: BipartiteGraph,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub th1: usize,
    pub th2: usize,
}

/// Orders numeric ids numerically, then everything else lexicographically.
fn id_key(id: &str) -> (u8, u64, String) {
    match id.parse::<u64>() {
        Ok(v) => (0, v, String::new()),
        Err(_) => (1, 0, id.to_string()),
    }
}

fn is_header(fields: &[&str]) -> bool {
    fields.iter().any(|f| f.contains(':'))
        || fields.get(2).is_some_and(|r| r.parse::<f64>().is_err())
        || fields
            .first()
            .is_some_and(|u| u.eq_ignore_ascii_case("user") || u.eq_ignore_ascii_case("user_id"))
}

/// Reads `user<TAB>item[<TAB>rating[<TAB>timestamp]]` or `user,item[,…]`
/// lines (a header line is tolerated), then filters users below `th1` and,
/// in the same single pass, items below `th2`.
pub fn load_interactions(path: &Path, opts: &InteractionOptions) -> Result<InteractionDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line_no = k + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains('\t') {
            trimmed.split('\t').map(str::trim).collect()
        } else if trimmed.contains(',') {
            trimmed.split(',').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::parse(
                path,
                line_no,
                "expected at least user and item",
            ));
        }
        if line_no == 1 && is_header(&fields) {
            continue;
        }
        if let Some(min) = opts.min_rating {
            let r: f64 = fields
                .get(2)
                .ok_or_else(|| Error::parse(path, line_no, "rating column required by min_rating"))?
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad rating {:?}", fields[2])))?;
            if r < min {
                continue;
            }
        } else if let Some(r) = fields.get(2) {
            r.parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("bad rating {r:?}")))?;
        }
        let key = (fields[0].to_string(), fields[1].to_string());
        if seen.insert(key.clone()) {
            pairs.push(key);
        }
    }
    Ok(filter_and_index(pairs, opts.th1, opts.th2))
}

/// Single thresholding pass and dense re-indexing.
pub(crate) fn filter_and_index(
    pairs: Vec<(String, String)>,
    th1: usize,
    th2: usize,
) -> InteractionDataset {
    let mut user_count: HashMap<&str, usize> = HashMap::new();
    for (u, _) in &pairs {
        *user_count.entry(u).or_default() += 1;
    }
    let kept: Vec<&(String, String)> = pairs
        .iter()
        .filter(|(u, _)| user_count[u.as_str()] >= th1)
        .collect();
    let mut item_count: HashMap<&str, usize> = HashMap::new();
    for (_, i) in &kept {
        *item_count.entry(i).or_default() += 1;
    }
    let kept: Vec<&(String, String)> = kept
        .into_iter()
        .filter(|(_, i)| item_count[i.as_str()] >= th2)
        .collect();

    let users: BTreeMap<(u8, u64, String), &str> =
        kept.iter().map(|(u, _)| (id_key(u), u.as_str())).collect();
    let items: BTreeMap<(u8, u64, String), &str> =
        kept.iter().map(|(_, i)| (id_key(i), i.as_str())).collect();
    let user_ids: Vec<String> = users.values().map(|s| s.to_string()).collect();
    let item_ids: Vec<String> = items.values().map(|s| s.to_string()).collect();
    let uidx: HashMap<&str, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let iidx: HashMap<&str, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(k, s)| (s.as_str(), k))
        .collect();
    let graph = BipartiteGraph::new(
        user_ids.len(),
        item_ids.len(),
        kept.iter()
            .map(|(u, i)| (uidx[u.as_str()], iidx[i.as_str()], 1.0)),
    )
    .expect("deduplicated, in-range interactions");
    InteractionDataset {
        graph,
        user_ids,
        item_ids,
        th1,
        th2,
    }
}
