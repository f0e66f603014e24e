use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

pub(crate) const META_FILE: &str = "meta.json";
pub(crate) const DATA_FILE: &str = "data.bin";
pub(crate) const DTYPE_F32LE: &str = "f32le";

#[derive(serde::Deserialize)]
struct ShapeProbe {
    shape: Vec<usize>,
    dtype: String,
}

/// Reads `meta.json` into `M` and the payload into a flat vector, checking the
/// payload byte count against the declared shape.
pub(crate) fn read_container<M: DeserializeOwned>(dir: &Path) -> Result<(M, Vec<usize>, Vec<f32>)> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => {
            Error::Format(format!("missing header {}", meta_path.display()))
        }
        _ => Error::io(&meta_path, e),
    })?;
    let probe: ShapeProbe = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;
    if probe.dtype != DTYPE_F32LE {
        return Err(Error::Format(format!(
            "{}: unsupported dtype {:?}",
            meta_path.display(),
            probe.dtype
        )));
    }
    let meta: M = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", meta_path.display())))?;

    let data_path = dir.join(DATA_FILE);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let expected = probe
        .shape
        .iter()
        .try_fold(4usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("{}: shape overflows", meta_path.display())))?;
    if bytes.len() != expected {
        return Err(Error::Integrity(format!(
            "{}: shape {:?} needs {expected} bytes, payload has {}",
            dir.display(),
            probe.shape,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((meta, probe.shape, values))
}

fn write_into(dir: &Path, meta: &impl Serialize, values: &[f32]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let data_path = dir.join(DATA_FILE);
    fs::write(&data_path, bytes).map_err(|e| Error::io(&data_path, e))
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "container".into());
    dir.with_file_name(format!(".{name}.{suffix}-{}", std::process::id()))
}

/// Writes the container into a temporary sibling directory and renames it over
/// `dir`, so readers never observe a half-written container.
pub(crate) fn write_container_atomic(dir: &Path, meta: &impl Serialize, values: &[f32]) -> Result<()> {
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = sibling(dir, "tmp");
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    write_into(&tmp, meta, values)?;
    if dir.exists() {
        let old = sibling(dir, "old");
        fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
        fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
        fs::remove_dir_all(&old).map_err(|e| Error::io(&old, e))?;
    } else {
        fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}
