//! Dataset ingestion, canonical export and split generation.

mod citation;
mod export;
mod interactions;
mod splits;
pub mod synthetic;

pub use citation::{load_citation, CitationDataset};
pub use export::{export_citation, sha256_hex, verify_bundle, BundleManifest, FileEntry};
pub use interactions::{load_interactions, InteractionDataset, InteractionOptions};
pub use splits::{
    interaction_split_sizes, split_interactions, split_labels, split_links, InteractionSplit,
    LabelSplit, LinkSplit, SplitBundle, DEFAULT_VAL_NODES,
};

use std::path::{Path, PathBuf};

/// Environment variable naming the dataset root directory.
pub const DATA_DIR_ENV: &str = "STRUCTLEARN_DATA_DIR";

/// Dataset root from the environment, if set.
pub fn data_dir() -> Option<PathBuf> {
    std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// `<root>/<name>/<name>.content` and `<root>/<name>/<name>.cites`.
pub fn citation_paths(root: &Path, name: &str) -> (PathBuf, PathBuf) {
    let dir = root.join(name);
    (
        dir.join(format!("{name}.content")),
        dir.join(format!("{name}.cites")),
    )
}

/// `<root>/ml-100k/u.data`.
pub fn movielens_100k_path(root: &Path) -> PathBuf {
    root.join("ml-100k").join("u.data")
}
