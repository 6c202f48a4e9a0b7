//! Weight checkpoint: `meta.json` (architecture tag, seed, parameter table,
//! digest) next to `params.f32` (all arrays, little-endian, in table order).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use jointhdr_autograd::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Architecture, ModelError, ModelWeights};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    format_version: u32,
    arch: Architecture,
    seed: u64,
    params: Vec<ParamEntry>,
    sha256: String,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.display().to_string(), source }
}

pub fn save_weights(w: &ModelWeights, dir: &Path) -> Result<(), ModelError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut bytes = Vec::with_capacity(w.param_count() * 4);
    let mut params = Vec::new();
    for (name, t) in w.iter() {
        bytes.extend(t.data().iter().flat_map(|v| v.to_le_bytes()));
        params.push(ParamEntry { name: name.clone(), shape: t.shape().to_vec() });
    }
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        arch: w.arch().clone(),
        seed: w.seed(),
        params,
        sha256: hex::encode(Sha256::digest(&bytes)),
    };
    let p = dir.join("params.f32");
    fs::write(&p, &bytes).map_err(io(&p))?;
    let p = dir.join("meta.json");
    fs::write(&p, serde_json::to_vec_pretty(&meta).expect("meta serializes")).map_err(io(&p))
}

pub fn load_weights(dir: &Path) -> Result<ModelWeights, ModelError> {
    let parse = |message: String| ModelError::Parse { path: dir.display().to_string(), message };
    let p = dir.join("meta.json");
    let meta: CheckpointMeta =
        serde_json::from_slice(&fs::read(&p).map_err(io(&p))?).map_err(|e| parse(format!("meta.json: {e}")))?;
    if meta.format_version != CHECKPOINT_VERSION {
        return Err(parse(format!("version {} (expected {CHECKPOINT_VERSION})", meta.format_version)));
    }
    let p = dir.join("params.f32");
    let bytes = fs::read(&p).map_err(io(&p))?;
    if hex::encode(Sha256::digest(&bytes)) != meta.sha256 {
        return Err(parse("params.f32 checksum mismatch".into()));
    }
    let mut floats = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    let mut params = BTreeMap::new();
    for e in meta.params {
        let n: usize = e.shape.iter().product();
        let data: Vec<f32> = floats.by_ref().take(n).collect();
        if data.len() != n {
            return Err(parse(format!("params.f32 truncated at {}", e.name)));
        }
        params.insert(e.name, Tensor::new(&e.shape, data).map_err(|e| parse(e.to_string()))?);
    }
    if floats.next().is_some() {
        return Err(parse("trailing data in params.f32".into()));
    }
    ModelWeights::from_params(meta.arch, meta.seed, params)
}

/// Reads only the architecture tag of a checkpoint.
pub fn read_architecture(dir: &Path) -> Result<Architecture, ModelError> {
    let p = dir.join("meta.json");
    let meta: CheckpointMeta = serde_json::from_slice(&fs::read(&p).map_err(io(&p))?)
        .map_err(|e| ModelError::Parse { path: dir.display().to_string(), message: format!("meta.json: {e}") })?;
    Ok(meta.arch)
}
