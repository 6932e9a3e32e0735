//! Run manifests (JSON) referencing content-addressed binary blobs.
//!
//! A run directory holds `records/<task>-s<seed>-r<run>.json` manifests and
//! a shared `blobs/<sha256>.bin` store. Blobs are masks in `TCKT` format,
//! weights in `TWGT` format and tensors in `TTSR` format; every read
//! re-hashes the blob and compares it with the manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::bytes::Reader;
use super::maskfile::{decode_mask, encode_mask};
use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::nn::{Architecture, Weights};
use crate::pruning::{PruneSchedule, RunRecord, StepRecord};
use crate::rng::SeedPolicy;
use crate::tensor::Tensor;

pub const MANIFEST_VERSION: u32 = 1;
const WEIGHTS_MAGIC: &[u8; 4] = b"TWGT";
const TENSOR_MAGIC: &[u8; 4] = b"TTSR";
const BLOB_VERSION: u32 = 1;

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn put_dims(out: &mut Vec<u8>, dims: &[usize]) {
    out.push(dims.len() as u8);
    for &d in dims {
        out.extend((d as u32).to_le_bytes());
    }
}

fn get_dims(r: &mut Reader<'_>) -> Result<Vec<usize>, ParseError> {
    let n = r.u8()? as usize;
    (0..n).map(|_| r.u32_le().map(|d| d as usize)).collect()
}

fn check_header(r: &mut Reader<'_>, magic: &[u8; 4]) -> Result<(), ParseError> {
    let tag = r.take(4)?;
    if tag != magic {
        return Err(r.error(
            0,
            ParseErrorKind::BadTag {
                expected: String::from_utf8_lossy(magic).into_owned(),
                actual: String::from_utf8_lossy(tag).into_owned(),
            },
        ));
    }
    let version = r.u32_le()?;
    if version != BLOB_VERSION {
        return Err(r.error(
            4,
            ParseErrorKind::Version {
                found: version,
                supported: BLOB_VERSION,
            },
        ));
    }
    Ok(())
}

pub fn encode_weights(weights: &Weights) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend(BLOB_VERSION.to_le_bytes());
    out.extend((weights.layer_count() as u32).to_le_bytes());
    for (w, b) in weights.layers().iter().zip(weights.biases()) {
        put_dims(&mut out, w.shape());
        for v in w.data() {
            out.extend(v.to_le_bytes());
        }
        out.extend((b.len() as u32).to_le_bytes());
        for v in b {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

pub fn decode_weights(bytes: &[u8], architecture: &Architecture) -> Result<Weights> {
    let mut r = Reader::new("twgt", bytes);
    check_header(&mut r, WEIGHTS_MAGIC)?;
    let count = r.u32_le()? as usize;
    let mut tensors = Vec::with_capacity(count.min(1024));
    let mut biases = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let dims = get_dims(&mut r)?;
        let len: usize = dims.iter().product();
        let data = (0..len).map(|_| r.f64_le()).collect::<Result<Vec<_>, _>>()?;
        tensors.push(Tensor::new(dims, data)?);
        let blen = r.u32_le()? as usize;
        biases.push((0..blen).map(|_| r.f64_le()).collect::<Result<Vec<_>, _>>()?);
    }
    r.finish()?;
    Weights::from_parts(architecture.clone(), tensors, biases)
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend(BLOB_VERSION.to_le_bytes());
    put_dims(&mut out, t.shape());
    for v in t.data() {
        out.extend(v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new("ttsr", bytes);
    check_header(&mut r, TENSOR_MAGIC)?;
    let dims = get_dims(&mut r)?;
    let len: usize = dims.iter().product();
    let data = (0..len).map(|_| r.f64_le()).collect::<Result<Vec<_>, _>>()?;
    r.finish()?;
    Tensor::new(dims, data)
}

/// SHA-256 (hex) of the canonical weight encoding.
pub fn weights_hash(weights: &Weights) -> String {
    sha256_hex(&encode_weights(weights))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub sha256: String,
    /// Path relative to the store root.
    pub path: String,
}

/// Content-addressed blob directory.
#[derive(Debug, Clone)]
pub struct BlobStore {
    root: PathBuf,
}

impl BlobStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn put(&self, bytes: &[u8]) -> Result<BlobRef> {
        let sha256 = sha256_hex(bytes);
        let rel = format!("blobs/{sha256}.bin");
        let path = self.root.join(&rel);
        if !path.exists() {
            let dir = self.root.join("blobs");
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
        Ok(BlobRef { sha256, path: rel })
    }

    pub fn get(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        let path = self.root.join(&blob.path);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let actual = sha256_hex(&bytes);
        if actual != blob.sha256 {
            return Err(Error::HashMismatch {
                path,
                expected: blob.sha256.clone(),
                actual,
            });
        }
        Ok(bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepManifest {
    pub prune_percent: f64,
    pub accuracy: f64,
    pub taus: Vec<usize>,
    pub mask: BlobRef,
    pub trained_weights: BlobRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: u32,
    pub task: String,
    pub seed: u64,
    pub run_id: u64,
    pub policy: SeedPolicy,
    pub architecture: Architecture,
    pub schedule: Vec<f64>,
    pub dense_accuracy: f64,
    pub init_weights: BlobRef,
    pub steps: Vec<StepManifest>,
    pub probe_outputs: BlobRef,
}

impl RunManifest {
    pub fn file_name(task: &str, seed: u64, run_id: u64) -> String {
        format!("{task}-s{seed}-r{run_id}.json")
    }
}

/// Writes blobs and `records/<task>-s<seed>-r<run>.json`; returns the manifest path.
pub fn write_run_record(store: &BlobStore, record: &RunRecord) -> Result<PathBuf> {
    let init_weights = store.put(&encode_weights(&record.init))?;
    let steps = record
        .steps
        .iter()
        .map(|s| {
            Ok(StepManifest {
                prune_percent: s.prune_percent,
                accuracy: s.accuracy,
                taus: s.mask.taus(),
                mask: store.put(&encode_mask(&s.mask))?,
                trained_weights: store.put(&encode_weights(&s.trained))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        version: MANIFEST_VERSION,
        task: record.task.clone(),
        seed: record.seed,
        run_id: record.run_id,
        policy: record.policy,
        architecture: record.init.architecture().clone(),
        schedule: record.schedule.percents().to_vec(),
        dense_accuracy: record.dense_accuracy,
        init_weights,
        steps,
        probe_outputs: store.put(&encode_tensor(&record.probe_outputs))?,
    };
    let dir = store.root().join("records");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let path = dir.join(RunManifest::file_name(&record.task, record.seed, record.run_id));
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Loads a manifest and all blobs it references, verifying every hash.
pub fn read_run_record(store: &BlobStore, manifest_path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let m: RunManifest = serde_json::from_str(&text)?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            found: m.version,
            expected: MANIFEST_VERSION,
        });
    }
    m.architecture.activation_shapes()?;
    let init = Arc::new(decode_weights(&store.get(&m.init_weights)?, &m.architecture)?);
    let steps = m
        .steps
        .iter()
        .map(|s| {
            let mask = decode_mask(&store.get(&s.mask)?)?;
            Ok(StepRecord {
                prune_percent: s.prune_percent,
                accuracy: s.accuracy,
                mask,
                trained: decode_weights(&store.get(&s.trained_weights)?, &m.architecture)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunRecord {
        task: m.task,
        seed: m.seed,
        run_id: m.run_id,
        policy: m.policy,
        schedule: PruneSchedule::new(m.schedule)?,
        init_hash: m.init_weights.sha256,
        init,
        dense_accuracy: m.dense_accuracy,
        steps,
        probe_outputs: decode_tensor(&store.get(&m.probe_outputs)?)?,
    })
}

/// Reads every manifest under `<root>/records`, ordered by (task, seed, run).
pub fn read_all_records(store: &BlobStore) -> Result<Vec<RunRecord>> {
    let dir = store.root().join("records");
    let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    let mut records = paths
        .iter()
        .map(|p| read_run_record(store, p))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| (&a.task, a.seed, a.run_id).cmp(&(&b.task, b.seed, b.run_id)));
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_weights, NetworkConfig};

    #[test]
    fn weights_and_tensor_round_trip() {
        let cfg = NetworkConfig::new(Architecture::mlp(4, &[3], 2));
        let w = init_weights(&cfg, 5).unwrap();
        assert_eq!(decode_weights(&encode_weights(&w), &cfg.architecture).unwrap(), w);
        let t = Tensor::new(vec![2, 2], vec![0.1, -0.0, f64::MIN_POSITIVE, 3.5]).unwrap();
        let back = decode_tensor(&encode_tensor(&t)).unwrap();
        assert!(back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn weights_blob_must_match_architecture() {
        let cfg = NetworkConfig::new(Architecture::mlp(4, &[3], 2));
        let w = init_weights(&cfg, 5).unwrap();
        let other = Architecture::mlp(4, &[5], 2);
        assert!(matches!(decode_weights(&encode_weights(&w), &other), Err(Error::Shape(_))));
    }

    #[test]
    fn corrupted_blob_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::new(dir.path());
        let blob = store.put(b"hello").unwrap();
        assert_eq!(store.get(&blob).unwrap(), b"hello");
        std::fs::write(dir.path().join(&blob.path), b"hellp").unwrap();
        assert!(matches!(store.get(&blob), Err(Error::HashMismatch { .. })));
    }
}
