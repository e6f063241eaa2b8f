//! Binary parameter checkpoints.
//!
//! Layout: magic `GCFC`, u32 format version, u32 meta length, meta JSON,
//! u32 parameter count, then per parameter: u32 name length, UTF-8 name,
//! u32 rows, u32 cols, and rows*cols little-endian f64 values in row-major
//! order. Parameters appear in store insertion order, so writing is
//! deterministic.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{Scaler, SplitFractions};
use crate::error::{Error, Result};
use crate::model::{FusionKind, GraphParams, ModelConfig};
use crate::nn::ParamStore;

const MAGIC: &[u8; 4] = b"GCFC";
const FORMAT_VERSION: u32 = 1;

/// Everything needed to rebuild the model around the stored parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub node_count: usize,
    /// View names in canonical order; empty for the temporal-only model.
    pub views: Vec<String>,
    pub fusion: FusionKind,
    pub model: ModelConfig,
    pub graph: GraphParams,
    pub split: SplitFractions,
    pub scaler: Scaler,
    pub seed: u64,
}

pub fn save_checkpoint(path: &Path, meta: &CheckpointMeta, store: &ParamStore) -> Result<()> {
    let meta_json = serde_json::to_vec(meta)
        .map_err(|e| Error::State(format!("checkpoint meta serialization failed: {e}")))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for param in store.iter() {
        let name = param.name.as_bytes();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name);
        let (rows, cols) = param.value.dim();
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for v in param.value.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::State(format!("truncated checkpoint while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointMeta, Vec<(String, Array2<f64>)>)> {
    let mut f = fs::File::open(path)
        .map_err(|e| Error::State(format!("cannot open checkpoint {}: {e}", path.display())))?;
    let mut magic = [0u8; 4];
    read_exact(&mut f, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::State(format!(
            "{} is not a checkpoint file",
            path.display()
        )));
    }
    let version = read_u32(&mut f, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::State(format!(
            "unsupported checkpoint format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let meta_len = read_u32(&mut f, "meta length")? as usize;
    let mut meta_buf = vec![0u8; meta_len];
    read_exact(&mut f, &mut meta_buf, "meta")?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_buf)
        .map_err(|e| Error::State(format!("bad checkpoint meta: {e}")))?;

    let count = read_u32(&mut f, "parameter count")? as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut f, "name length")? as usize;
        let mut name_buf = vec![0u8; name_len];
        read_exact(&mut f, &mut name_buf, "name")?;
        let name = String::from_utf8(name_buf)
            .map_err(|_| Error::State("parameter name is not UTF-8".into()))?;
        let rows = read_u32(&mut f, "rows")? as usize;
        let cols = read_u32(&mut f, "cols")? as usize;
        let mut data = vec![0.0f64; rows * cols];
        for v in data.iter_mut() {
            let mut b = [0u8; 8];
            read_exact(&mut f, &mut b, "values")?;
            *v = f64::from_le_bytes(b);
        }
        let value = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::State(format!("bad parameter shape: {e}")))?;
        params.push((name, value));
    }
    Ok((meta, params))
}

/// Overwrites store values from checkpoint entries; every stored name
/// must exist with a matching shape, and every store parameter must be
/// covered.
pub fn apply_params(store: &mut ParamStore, params: &[(String, Array2<f64>)]) -> Result<()> {
    if params.len() != store.len() {
        return Err(Error::State(format!(
            "checkpoint has {} parameters, model has {}",
            params.len(),
            store.len()
        )));
    }
    for (name, value) in params {
        let id = store
            .lookup(name)
            .ok_or_else(|| Error::State(format!("checkpoint parameter '{name}' not in model")))?;
        if store.value(id).dim() != value.dim() {
            return Err(Error::State(format!(
                "parameter '{name}' is {:?} in checkpoint but {:?} in model",
                value.dim(),
                store.value(id).dim()
            )));
        }
        store.value_mut(id).assign(value);
    }
    Ok(())
}
