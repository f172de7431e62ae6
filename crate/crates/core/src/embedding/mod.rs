//! Sentence embeddings: mean pooling, unit normalisation, and the immutable
//! store the neighbour search runs on.
//!
//! Values are stored as `f32`; every reduction (means, norms, dot products)
//! accumulates in `f64`.

pub mod format;

use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

pub use format::{EmbeddingFile, EmbeddingRows, FormatError};

use crate::corpus::Corpus;

/// Vectors with a norm at or below this are rejected.
pub const MIN_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: FormatError,
    },
    #[error("sentence {sentence_id}: no token vectors to pool")]
    NoTokens { sentence_id: usize },
    #[error("sentence {sentence_id}: token {token} has dimension {found}, expected {expected}")]
    DimMismatch {
        sentence_id: usize,
        token: usize,
        expected: usize,
        found: usize,
    },
    #[error("sentence {sentence_id}: embedding norm {norm:e} is too close to zero")]
    ZeroNorm { sentence_id: usize, norm: f64 },
    #[error("sentence {sentence_id}: embedding contains a non-finite value")]
    NonFinite { sentence_id: usize },
    #[error("{embeddings} embeddings for a corpus of {sentences} sentences")]
    CountMismatch { embeddings: usize, sentences: usize },
}

/// Per-token encoder outputs for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddings {
    pub sentence_id: usize,
    pub vectors: Vec<Vec<f32>>,
}

/// Component-wise mean of the token vectors.
pub fn mean_pool(tokens: &TokenEmbeddings) -> Result<Vec<f64>, EmbeddingError> {
    let sentence_id = tokens.sentence_id;
    let first = tokens
        .vectors
        .first()
        .ok_or(EmbeddingError::NoTokens { sentence_id })?;
    let dim = first.len();
    for (token, v) in tokens.vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(EmbeddingError::DimMismatch {
                sentence_id,
                token,
                expected: dim,
                found: v.len(),
            });
        }
    }
    Ok(pool_rows(tokens.vectors.iter().map(Vec::as_slice), dim, tokens.vectors.len()))
}

fn pool_flat(sentence_id: usize, flat: &[f32], dim: usize) -> Result<Vec<f64>, EmbeddingError> {
    let count = flat.len() / dim;
    if count == 0 {
        return Err(EmbeddingError::NoTokens { sentence_id });
    }
    Ok(pool_rows(flat.chunks_exact(dim), dim, count))
}

fn pool_rows<'a>(rows: impl Iterator<Item = &'a [f32]>, dim: usize, count: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; dim];
    for row in rows {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }
    let n = count as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Scales `v` to unit Euclidean norm. `sentence_id` is only used for error
/// reporting.
pub fn normalize(v: &[f64], sentence_id: usize) -> Result<Vec<f64>, EmbeddingError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbeddingError::NonFinite { sentence_id });
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(EmbeddingError::NonFinite { sentence_id });
    }
    if norm <= MIN_NORM {
        return Err(EmbeddingError::ZeroNorm { sentence_id, norm });
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Row-major matrix of unit-normalised sentence embeddings; row `i` belongs
/// to sentence id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    language: String,
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// Normalises each `dim`-sized row of `raw` (per-sentence vectors).
    pub fn from_raw(language: impl Into<String>, dim: usize, raw: &[f32]) -> Result<Self, EmbeddingError> {
        assert!(dim > 0, "dimension must be positive");
        assert_eq!(raw.len() % dim, 0, "raw length must be a multiple of dim");
        let rows: Vec<Vec<f32>> = raw
            .par_chunks_exact(dim)
            .enumerate()
            .map(|(id, row)| {
                let wide: Vec<f64> = row.iter().map(|&x| f64::from(x)).collect();
                unit_row(&wide, id)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::assemble(language.into(), dim, rows))
    }

    fn assemble(language: String, dim: usize, rows: Vec<Vec<f32>>) -> Self {
        let mut data = Vec::with_capacity(rows.len() * dim);
        rows.into_iter().for_each(|r| data.extend(r));
        EmbeddingStore { language, dim, data }
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, id: usize) -> &[f32] {
        &self.data[id * self.dim..(id + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Serialises the (already normalised) rows as a per-sentence file.
    pub fn to_file(&self) -> EmbeddingFile {
        EmbeddingFile::per_sentence(self.dim, self.data.clone()).expect("store rows are dim-aligned")
    }
}

fn unit_row(raw: &[f64], id: usize) -> Result<Vec<f32>, EmbeddingError> {
    Ok(normalize(raw, id)?.into_iter().map(|x| x as f32).collect())
}

/// Pools (for per-token input) and normalises every row, in id order.
pub fn build_store(corpus: &Corpus, embeddings: &EmbeddingFile) -> Result<EmbeddingStore, EmbeddingError> {
    if embeddings.n_rows() != corpus.len() {
        return Err(EmbeddingError::CountMismatch {
            embeddings: embeddings.n_rows(),
            sentences: corpus.len(),
        });
    }
    let dim = embeddings.dim();
    match embeddings.rows() {
        EmbeddingRows::PerSentence(values) => EmbeddingStore::from_raw(corpus.language(), dim, values),
        EmbeddingRows::PerToken(rows) => {
            let rows: Vec<Vec<f32>> = rows
                .par_iter()
                .enumerate()
                .map(|(id, flat)| unit_row(&pool_flat(id, flat, dim)?, id))
                .collect::<Result<_, _>>()?;
            Ok(EmbeddingStore::assemble(corpus.language().to_owned(), dim, rows))
        }
    }
}

/// Reads and decodes a `PPEM` embedding file.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingFile, EmbeddingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmbeddingFile::decode(&bytes).map_err(|source| EmbeddingError::Format {
        path: path.display().to_string(),
        source,
    })
}
