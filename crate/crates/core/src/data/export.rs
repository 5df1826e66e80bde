//! Canonical on-disk bundle for a citation dataset.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::citation::CitationDataset;
use crate::error::{Error, Result};

pub const EDGES_FILE: &str = "edges.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_names: Vec<String>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<FileEntry> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&path, e))?;
    Ok(FileEntry {
        name: name.to_string(),
        sha256: sha256_hex(bytes),
        bytes: bytes.len() as u64,
    })
}

/// Writes the edge list, sparse feature triplets (`node,feature,value`),
/// labels (`node,id,label`) and a manifest with per-file checksums.
pub fn export_citation(ds: &CitationDataset, dir: &Path) -> Result<BundleManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    files.push(write_file(
        dir,
        EDGES_FILE,
        ds.graph.to_edge_list_string().as_bytes(),
    )?);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "feature", "value"])?;
    for r in 0..ds.features.n_rows() {
        for (c, v) in ds.features.row(r) {
            w.write_record([r.to_string(), c.to_string(), format!("{v:e}")])?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(dir.join(FEATURES_FILE), e.into_error()))?;
    files.push(write_file(dir, FEATURES_FILE, &bytes)?);

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["node", "id", "label"])?;
    for (k, (id, &l)) in ds.node_ids.iter().zip(&ds.labels).enumerate() {
        w.write_record([k.to_string(), id.clone(), ds.class_names[l].clone()])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::io(dir.join(LABELS_FILE), e.into_error()))?;
    files.push(write_file(dir, LABELS_FILE, &bytes)?);

    let manifest = BundleManifest {
        n_nodes: ds.n_nodes(),
        n_edges: ds.graph.n_edges(),
        n_features: ds.n_features(),
        n_classes: ds.n_classes(),
        class_names: ds.class_names.clone(),
        files,
    };
    let json = serde_json::to_vec_pretty(&manifest)?;
    write_file(dir, MANIFEST_FILE, &json)?;
    Ok(manifest)
}

/// Recomputes every checksum listed in a bundle manifest.
pub fn verify_bundle(dir: &Path) -> Result<BundleManifest> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: BundleManifest = serde_json::from_slice(&text)?;
    for f in &manifest.files {
        let path = dir.join(&f.name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let got = sha256_hex(&bytes);
        if got != f.sha256 {
            return Err(Error::InvalidArgument(format!(
                "checksum mismatch for {}",
                f.name
            )));
        }
    }
    Ok(manifest)
}
