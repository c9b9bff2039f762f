//! Binary weight files: `NCKP`, u16 version, u32 header length, JSON header,
//! then every tensor as packed little-endian f32.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"NCKP";
pub const FORMAT_VERSION: u16 = 1;
const PREAMBLE: usize = 4 + 2 + 4;

/// One completed training run in a weight lineage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    /// Band subset trained on: `raw`, `theta`, ... or `theta+alpha+beta` for a pooled run.
    pub subset: String,
    pub epochs: usize,
    pub seed: u64,
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the data region.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
    provenance: Vec<Stage>,
    /// SHA-256 of the data region, hex.
    checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    pub provenance: Vec<Stage>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>, provenance: Vec<Stage>) -> Self {
        Self { params, provenance }
    }

    pub fn config(&self) -> &ModelConfig {
        self.params.config()
    }

    /// Append-only: the returned checkpoint keeps every earlier stage.
    pub fn extended(&self, params: ModelParams<f32>, stage: Stage) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(stage);
        Self { params, provenance }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut data = Vec::with_capacity(self.params.num_scalars() * 4);
        let mut tensors = Vec::new();
        for (name, t) in self.params.tensors() {
            tensors.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset: data.len(),
            });
            for v in t.data() {
                data.extend_from_slice(&v.to_le_bytes());
            }
        }
        let header = Header {
            config: self.params.config().clone(),
            tensors,
            provenance: self.provenance.clone(),
            checksum: hex::encode(Sha256::digest(&data)),
        };
        let header = serde_json::to_vec(&header)?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Checkpoint("header exceeds 4 GiB".into()))?;
        let mut out = Vec::with_capacity(PREAMBLE + header.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREAMBLE {
            return Err(Error::Checkpoint("truncated preamble".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let header_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
        let data_start = PREAMBLE + header_len;
        if bytes.len() < data_start {
            return Err(Error::Checkpoint("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[PREAMBLE..data_start])
            .map_err(|e| Error::Checkpoint(format!("malformed header: {e}")))?;
        let data = &bytes[data_start..];

        let expected: usize = header
            .tensors
            .iter()
            .map(|t| t.shape.iter().product::<usize>() * 4)
            .sum();
        if data.len() < expected {
            return Err(Error::Checkpoint(format!(
                "truncated tensor data: {} of {expected} bytes",
                data.len()
            )));
        }
        if data.len() > expected {
            return Err(Error::Checkpoint("trailing bytes after tensor data".into()));
        }
        if hex::encode(Sha256::digest(data)) != header.checksum {
            return Err(Error::Checkpoint("checksum mismatch, file is corrupted".into()));
        }

        let mut table = Vec::with_capacity(header.tensors.len());
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            let bytes = data
                .get(entry.offset..entry.offset + n * 4)
                .ok_or_else(|| Error::Checkpoint(format!("tensor `{}` out of range", entry.name)))?;
            let values = bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            table.push((entry.name.clone(), entry.shape.clone(), values));
        }
        let mut params = ModelParams::zeros(&header.config)?;
        params.load_tensors(table)?;
        Ok(Self {
            params,
            provenance: header.provenance,
        })
    }
}

/// Written to a sibling temp file, then renamed over `path`.
pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    let bytes = checkpoint.to_bytes()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads and refuses weights whose architecture differs from `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ensure_config(ckpt.config(), expected)?;
    Ok(ckpt)
}

pub fn ensure_config(found: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    if found != expected {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint has lstm sizes {:?}, dense {} ({} inputs, {} steps); expected {:?}, dense {} ({} inputs, {} steps)",
            found.lstm_sizes,
            found.dense_hidden,
            found.input_features,
            found.sequence_length,
            expected.lstm_sizes,
            expected.dense_hidden,
            expected.input_features,
            expected.sequence_length,
        )));
    }
    Ok(())
}
