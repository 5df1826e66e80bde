//! Parameter checkpoints: a flat little-endian `f32` blob plus a JSON
//! manifest naming each tensor's shape and offset.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::Params;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Offset in elements from the start of the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dtype: String,
    pub tensors: Vec<TensorEntry>,
}

fn manifest_path(blob: &Path) -> PathBuf {
    blob.with_extension("json")
}

/// Writes `<path>` (blob) and `<path>.json` with extension replaced.
pub fn save_checkpoint<F: Real, P: Params<F>>(params: &P, path: &Path) -> Result<Manifest> {
    let mut bytes = Vec::with_capacity(4 * params.n_scalars());
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, t) in params.names().into_iter().zip(params.tensors()) {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: [t.nrows(), t.ncols()],
            offset,
        });
        for v in t.iter() {
            bytes.extend_from_slice(&(v.to_f32().expect("finite")).to_le_bytes());
        }
        offset += t.len();
    }
    let manifest = Manifest {
        dtype: "f32-le".into(),
        tensors,
    };
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    let mpath = manifest_path(path);
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Reads tensors into `params`, whose names and shapes must match.
pub fn load_checkpoint<F: Real, P: Params<F>>(params: &mut P, path: &Path) -> Result<()> {
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(path, 0, "blob length not a multiple of 4"));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let names = params.names();
    if names.len() != manifest.tensors.len() {
        return Err(Error::Dimension(format!(
            "checkpoint has {} tensors, expected {}",
            manifest.tensors.len(),
            names.len()
        )));
    }
    for ((name, t), entry) in names
        .into_iter()
        .zip(params.tensors_mut())
        .zip(&manifest.tensors)
    {
        if entry.name != name {
            return Err(Error::Dimension(format!(
                "tensor {} where {name} expected",
                entry.name
            )));
        }
        let [r, c] = entry.shape;
        let end = entry.offset + r * c;
        if end > values.len() {
            return Err(Error::parse(
                path,
                0,
                format!("tensor {name} runs past end of blob"),
            ));
        }
        *t = Array2::from_shape_vec(
            (r, c),
            values[entry.offset..end]
                .iter()
                .map(|&v| F::of(v as f64))
                .collect(),
        )
        .expect("shape checked");
    }
    Ok(())
}
