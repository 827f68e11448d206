//! Embeddings: the built-in pooled extractor and the external binary format.
//!
//! The pooled embedder summarizes a log-mel matrix by per-band statistics
//! over time — all means, then all population standard deviations, then all
//! maxima — giving `3 * n_mels` dimensions. Externally computed embeddings
//! (for example 2048-dim vectors from a pretrained network) are ingested
//! from `EMB1` files instead.
//!
//! `EMB1` layout (little-endian): magic `EMB1`, u32 record count, u32
//! dimension, then per record a u16 id length, the UTF-8 id bytes, and
//! `dim` f32 values.

use super::TrainError;
use crate::dsp::LogMelSpectrogram;
use std::collections::BTreeMap;
use std::io::{self, Read, Write};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_id: String,
}

/// Per-band (mean, std, max) over time, concatenated by statistic.
pub fn embed_pooled(l: &LogMelSpectrogram, source_id: &str) -> Result<EmbeddingVector, TrainError> {
    if l.n_frames() == 0 {
        return Err(TrainError::EmptyInput);
    }
    let bands = l.n_bands();
    let frames = l.n_frames() as f64;
    let mut values = vec![0.0f64; 3 * bands];
    for b in 0..bands {
        let col = l.values.column(b);
        let mean = col.sum() / frames;
        let var = col.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / frames;
        let max = col.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        values[b] = mean;
        values[bands + b] = var.sqrt();
        values[2 * bands + b] = max;
    }
    Ok(EmbeddingVector {
        values,
        source_id: source_id.to_string(),
    })
}

#[derive(Debug, Error)]
pub enum EmbeddingIoError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
}

const MAGIC: &[u8; 4] = b"EMB1";

/// Uniform-dimension embedding map keyed by source id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    dim: usize,
    map: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(dim: usize) -> Self {
        EmbeddingSet {
            dim,
            map: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Vec<f64>> {
        self.map.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn insert(&mut self, v: EmbeddingVector) -> Result<(), EmbeddingIoError> {
        if v.values.len() != self.dim {
            return Err(EmbeddingIoError::DimensionMismatch {
                expected: self.dim,
                got: v.values.len(),
            });
        }
        if self.map.contains_key(&v.source_id) {
            return Err(EmbeddingIoError::DuplicateId(v.source_id));
        }
        self.map.insert(v.source_id, v.values);
        Ok(())
    }

    /// Combine two sets; dimensions must agree and ids must not repeat.
    pub fn merge(mut self, other: EmbeddingSet) -> Result<EmbeddingSet, EmbeddingIoError> {
        if other.dim != self.dim {
            return Err(EmbeddingIoError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        for (id, values) in other.map {
            if self.map.contains_key(&id) {
                return Err(EmbeddingIoError::DuplicateId(id));
            }
            self.map.insert(id, values);
        }
        Ok(self)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<(), EmbeddingIoError> {
        out.write_all(MAGIC)?;
        out.write_all(&(self.map.len() as u32).to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        for (id, values) in &self.map {
            let id_bytes = id.as_bytes();
            if id_bytes.len() > u16::MAX as usize {
                return Err(EmbeddingIoError::Format(format!(
                    "id longer than {} bytes",
                    u16::MAX
                )));
            }
            out.write_all(&(id_bytes.len() as u16).to_le_bytes())?;
            out.write_all(id_bytes)?;
            for &v in values {
                out.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read<R: Read>(mut input: R) -> Result<EmbeddingSet, EmbeddingIoError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EmbeddingIoError::Format("bad magic, expected EMB1".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let count = u32::from_le_bytes(word) as usize;
        input.read_exact(&mut word)?;
        let dim = u32::from_le_bytes(word) as usize;

        let mut set = EmbeddingSet::new(dim);
        for _ in 0..count {
            let mut half = [0u8; 2];
            input.read_exact(&mut half)?;
            let id_len = u16::from_le_bytes(half) as usize;
            let mut id_bytes = vec![0u8; id_len];
            input.read_exact(&mut id_bytes)?;
            let id = String::from_utf8(id_bytes)
                .map_err(|_| EmbeddingIoError::Format("id is not valid UTF-8".into()))?;
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                input.read_exact(&mut word)?;
                values.push(f64::from(f32::from_le_bytes(word)));
            }
            set.insert(EmbeddingVector {
                values,
                source_id: id,
            })?;
        }
        Ok(set)
    }
}
