//! Self-describing binary checkpoints.
//!
//! Layout: the magic bytes `HNIL`, a little-endian `u32` format version, a
//! little-endian `u32` byte length followed by that many bytes of JSON
//! metadata, then every tensor of [`TENSOR_NAMES`] in order as row-major
//! little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocab};
use crate::encoder::{Dims, ModelParams, TENSOR_NAMES};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::training::Hyper;

pub const MAGIC: &[u8; 4] = b"HNIL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub dims: Dims,
    pub hyper: Hyper,
    /// Index-ordered vocabulary including the UNK placeholder at 0.
    pub vocab: Vec<String>,
    pub min_count: usize,
    pub user_ids: Vec<String>,
    pub tensors: Vec<TensorSpec>,
}

impl CheckpointMeta {
    pub fn vocab(&self) -> Vocab {
        Vocab::from_tokens(self.vocab.clone(), self.min_count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: CheckpointMeta,
}

impl Checkpoint {
    pub fn into_model(self) -> Result<Model> {
        let vocab = self.meta.vocab();
        Model::new(self.params, vocab, self.meta.user_ids, self.meta.hyper.score_norm)
    }
}

/// Serializes parameters, hyperparameters, vocabulary and user table.
pub fn encode_checkpoint(
    params: &ModelParams,
    hyper: &Hyper,
    vocab: &Vocab,
    user_ids: &[String],
) -> Result<Vec<u8>> {
    if params.vocab_size() != vocab.len() || params.num_users() != user_ids.len() {
        return Err(Error::DimensionMismatch(
            "parameters do not match the vocabulary or user table being saved".into(),
        ));
    }
    let tensors = TENSOR_NAMES
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| TensorSpec {
            name: (*name).to_owned(),
            rows: t.rows,
            cols: t.cols,
        })
        .collect();
    let meta = CheckpointMeta {
        dims: params.dims,
        hyper: Hyper {
            dims: params.dims,
            ..hyper.clone()
        },
        vocab: vocab.tokens().to_vec(),
        min_count: vocab.min_count(),
        user_ids: user_ids.to_vec(),
        tensors,
    };
    let json = serde_json::to_vec(&meta)
        .map_err(|e| Error::Checkpoint(format!("cannot serialize metadata: {e}")))?;
    let meta_len = u32::try_from(json.len())
        .map_err(|_| Error::Checkpoint("metadata block exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * params.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&meta_len.to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for &v in &t.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(
    params: &ModelParams,
    hyper: &Hyper,
    vocab: &Vocab,
    user_ids: &[String],
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(params, hyper, vocab, user_ids)?;
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    file.sync_all().map_err(|e| Error::io(path, e))
}

/// Saves parameters trained on `corpus`.
pub fn save_for_corpus(params: &ModelParams, hyper: &Hyper, corpus: &Corpus, path: &Path) -> Result<()> {
    save_checkpoint(params, hyper, corpus.vocab(), &corpus.user_ids(), path)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Checkpoint(format!(
                "truncated file: {what} needs {n} bytes at offset {} but only {} remain",
                self.pos,
                self.bytes.len() - self.pos
            ))),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = r.u32("format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "version mismatch: file has format {version}, this build reads {FORMAT_VERSION}"
        )));
    }
    let meta_len = r.u32("metadata length")? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(r.take(meta_len, "metadata")?)
        .map_err(|e| Error::Checkpoint(format!("malformed metadata: {e}")))?;
    let mut params = ModelParams::zeros(meta.dims, meta.vocab.len(), meta.user_ids.len());
    let expected: Vec<TensorSpec> = TENSOR_NAMES
        .iter()
        .zip(params.tensors())
        .map(|(name, t)| TensorSpec {
            name: (*name).to_owned(),
            rows: t.rows,
            cols: t.cols,
        })
        .collect();
    if expected != meta.tensors {
        return Err(Error::Checkpoint(
            "tensor manifest disagrees with the declared dimensions".into(),
        ));
    }
    for (name, t) in TENSOR_NAMES.iter().zip(params.tensors_mut()) {
        let raw = r.take(4 * t.data.len(), &format!("tensor {name}"))?;
        for (dst, chunk) in t.data.iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]) as f64;
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last tensor",
            bytes.len() - r.pos
        )));
    }
    Ok(Checkpoint { params, meta })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
