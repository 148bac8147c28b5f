use std::path::Path;

use facelab_autograd::{ParamStore, Tensor};
use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT: &str = "facelab-checkpoint";

/// Location of one named array inside a binary blob of little-endian f32.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements.
    pub offset: usize,
}

impl BundleEntry {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Writes the arrays back to back and returns their index.
pub fn write_bundle<'a>(
    path: &Path,
    arrays: impl IntoIterator<Item = (&'a str, &'a [usize], &'a [f32])>,
) -> Result<Vec<BundleEntry>> {
    let mut bytes = Vec::new();
    let mut index = Vec::new();
    let mut offset = 0;
    for (name, shape, data) in arrays {
        index.push(BundleEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            offset,
        });
        offset += data.len();
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    Ok(index)
}

/// Reads every indexed array; the blob must be exactly as long as the index
/// says.
pub fn read_bundle(path: &Path, index: &[BundleEntry]) -> Result<Vec<Vec<f32>>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let total: usize = index.iter().map(|e| e.len()).sum();
    if bytes.len() != 4 * total {
        return Err(Error::CorruptCheckpoint(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            4 * total,
            bytes.len()
        )));
    }
    let mut expected_offset = 0;
    index
        .iter()
        .map(|e| {
            if e.offset != expected_offset {
                return Err(Error::CorruptCheckpoint(format!("{}: bad offset", e.name)));
            }
            expected_offset += e.len();
            let start = 4 * e.offset;
            let data: Vec<f32> = bytes[start..start + 4 * e.len()]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("checkpoint tensor {}", e.name)));
            }
            Ok(data)
        })
        .collect()
}

/// Training position recorded with a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointInfo {
    pub iteration: u64,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: ModelConfig,
    iteration: u64,
    seed: u64,
    tensors: Vec<BundleEntry>,
}

impl Model<f32> {
    /// Writes `manifest.json` and `weights.bin` into `dir` (created if needed).
    pub fn save(&self, dir: &Path, info: CheckpointInfo) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tensors = write_bundle(
            &dir.join(WEIGHTS_FILE),
            self.params().iter().map(|(_, n, t)| (n, t.shape(), t.data())),
        )?;
        let manifest = Manifest {
            format: FORMAT.to_string(),
            config: *self.config(),
            iteration: info.iteration,
            seed: info.seed,
            tensors,
        };
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::json(&path, e))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Loads a checkpoint, checking every tensor against the topology its
    /// manifest config describes.
    pub fn load(dir: &Path) -> Result<(Self, CheckpointInfo)> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        if m.format != FORMAT {
            return Err(Error::CorruptCheckpoint(format!("unknown format {}", m.format)));
        }
        let template = Model::<f32>::build(m.config, 0)?;
        for (_, name, t) in template.params().iter() {
            let entry = m
                .tensors
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
            if entry.shape != t.shape() {
                return Err(Error::CheckpointShape {
                    name: name.to_string(),
                    expected: t.shape().to_vec(),
                    found: entry.shape.clone(),
                });
            }
        }
        if m.tensors.len() != template.params().len() {
            let extra = m
                .tensors
                .iter()
                .find(|e| template.params().find(&e.name).is_err())
                .map_or_else(|| "duplicate entries".to_string(), |e| format!("unexpected tensor {}", e.name));
            return Err(Error::CorruptCheckpoint(extra));
        }
        let arrays = read_bundle(&dir.join(WEIGHTS_FILE), &m.tensors)?;
        let mut store = ParamStore::new();
        for (_, name, _) in template.params().iter() {
            let i = m.tensors.iter().position(|e| e.name == name).expect("checked above");
            store.register(name, Tensor::new(&m.tensors[i].shape, arrays[i].clone())?);
        }
        let model = template.with_params(store)?;
        Ok((
            model,
            CheckpointInfo {
                iteration: m.iteration,
                seed: m.seed,
            },
        ))
    }
}
