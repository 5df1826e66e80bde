//! Citation corpora in the LINQS `content`/`cites` layout.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{largest_connected_component, WeightedGraph};
use crate::real::Real;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CitationDataset {
    pub graph: WeightedGraph,
    /// Row-normalized bag-of-words features `[n × f]`.
    pub features: CsrMatrix,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    /// Original document ids, indexed by node.
    pub node_ids: Vec<String>,
    /// Citation lines naming an id missing from the content file.
    pub dangling_citations: usize,
}

impl CitationDataset {
    pub fn n_nodes(&self) -> usize {
        self.graph.n_nodes()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn dense_features<F: Real>(&self) -> Array2<F> {
        let mut out = Array2::zeros((self.features.n_rows(), self.features.n_cols()));
        for r in 0..self.features.n_rows() {
            for (c, v) in self.features.row(r) {
                out[[r, c]] = F::of(v);
            }
        }
        out
    }

    /// Restricts to `keep` (new index → old index) with a matching graph.
    pub(crate) fn reindexed(&self, graph: WeightedGraph, keep: &[usize]) -> CitationDataset {
        let triplets: Vec<(usize, usize, f64)> = keep
            .iter()
            .enumerate()
            .flat_map(|(new, &old)| self.features.row(old).map(move |(c, v)| (new, c, v)))
            .collect();
        CitationDataset {
            graph,
            features: CsrMatrix::from_triplets(keep.len(), self.n_features(), &triplets),
            labels: keep.iter().map(|&o| self.labels[o]).collect(),
            class_names: self.class_names.clone(),
            node_ids: keep.iter().map(|&o| self.node_ids[o].clone()).collect(),
            dangling_citations: self.dangling_citations,
        }
    }
}

/// Divides each row by its sum; all-zero rows stay zero.
pub(crate) fn row_normalize(
    rows: usize,
    cols: usize,
    triplets: &mut [(usize, usize, f64)],
) -> CsrMatrix {
    let mut sums = vec![0.0; rows];
    for &(r, _, v) in triplets.iter() {
        sums[r] += v;
    }
    for t in triplets.iter_mut() {
        if sums[t.0] != 0.0 {
            t.2 /= sums[t.0];
        }
    }
    CsrMatrix::from_triplets(rows, cols, triplets)
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (usize, Result<String>)> + '_> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(k, l)| (k + 1, l.map_err(|e| Error::io(path, e)))))
}

/// Loads a corpus, merges duplicate and reciprocal citations, drops
/// self-citations, keeps the largest connected component and row-normalizes
/// the features.
pub fn load_citation(content_path: &Path, cites_path: &Path) -> Result<CitationDataset> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut triplets = Vec::new();
    let mut n_features: Option<usize> = None;
    for (line_no, line) in lines(content_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                content_path,
                line_no,
                "expected id, features and label",
            ));
        }
        let f = fields.len() - 2;
        match n_features {
            None => n_features = Some(f),
            Some(prev) if prev != f => {
                return Err(Error::parse(
                    content_path,
                    line_no,
                    format!("{f} features, previous lines had {prev}"),
                ))
            }
            _ => {}
        }
        let id = fields[0].trim().to_string();
        if index.contains_key(&id) {
            return Err(Error::parse(
                content_path,
                line_no,
                format!("duplicate id {id}"),
            ));
        }
        let node = ids.len();
        for (c, tok) in fields[1..=f].iter().enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::parse(content_path, line_no, format!("bad feature value {tok:?}"))
            })?;
            if v != 0.0 {
                triplets.push((node, c, v));
            }
        }
        index.insert(id.clone(), node);
        ids.push(id);
        raw_labels.push(fields[f + 1].trim().to_string());
    }
    let n = ids.len();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| class_names.binary_search(l).expect("label collected"))
        .collect();

    let mut pairs = BTreeSet::new();
    let mut dangling = 0usize;
    for (line_no, line) in lines(cites_path)? {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::parse(cites_path, line_no, "expected two ids"));
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) if a != b => {
                pairs.insert((a.min(b), a.max(b)));
            }
            (Some(_), Some(_)) => {}
            _ => dangling += 1,
        }
    }
    if dangling > 0 {
        log::warn!(
            "{}: skipped {dangling} citations with unknown ids",
            cites_path.display()
        );
    }
    let graph = WeightedGraph::from_pairs(n, pairs)?;
    let full = CitationDataset {
        graph,
        features: row_normalize(n, n_features.unwrap_or(0), &mut triplets),
        labels,
        class_names,
        node_ids: ids,
        dangling_citations: dangling,
    };
    let (lcc, keep) = largest_connected_component(&full.graph)?;
    Ok(full.reindexed(lcc, &keep))
}
