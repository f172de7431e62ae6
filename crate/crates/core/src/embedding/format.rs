//! Binary embedding file codec.
//!
//! Layout (little-endian):
//!
//! ```text
//! "PPEM"  u32 version=1  u32 n_rows  u32 dim  u8 kind
//! kind 0 (per-sentence): n_rows * dim f32
//! kind 1 (per-token):    n_rows * (u32 token_count, token_count * dim f32)
//! ```
//!
//! Decoding rejects trailing bytes, so `encode(decode(b)) == b` for every
//! accepted input, NaN payloads included.

use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"PPEM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 17;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("truncated input: needed {needed} more bytes at offset {offset}")]
    Truncated { offset: usize, needed: usize },
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown row kind {0}")]
    UnknownKind(u8),
    #[error("dimension must be at least 1")]
    ZeroDim,
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("payload size overflows")]
    Overflow,
    #[error("row {row} has {len} values, not a multiple of dim {dim}")]
    RaggedRow { row: usize, len: usize, dim: usize },
}

/// Row payload of an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingRows {
    /// Row-major `n_rows * dim` matrix.
    PerSentence(Vec<f32>),
    /// One flat `token_count * dim` block per sentence.
    PerToken(Vec<Vec<f32>>),
}

/// Decoded contents of a `PPEM` file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    dim: usize,
    n_rows: usize,
    rows: EmbeddingRows,
}

impl EmbeddingFile {
    pub fn per_sentence(dim: usize, values: Vec<f32>) -> Result<Self, FormatError> {
        if dim == 0 {
            return Err(FormatError::ZeroDim);
        }
        if !values.len().is_multiple_of(dim) {
            return Err(FormatError::RaggedRow {
                row: values.len() / dim,
                len: values.len(),
                dim,
            });
        }
        Ok(EmbeddingFile {
            dim,
            n_rows: values.len() / dim,
            rows: EmbeddingRows::PerSentence(values),
        })
    }

    pub fn per_token(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self, FormatError> {
        if dim == 0 {
            return Err(FormatError::ZeroDim);
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() % dim != 0) {
            return Err(FormatError::RaggedRow { row, len: r.len(), dim });
        }
        Ok(EmbeddingFile {
            dim,
            n_rows: rows.len(),
            rows: EmbeddingRows::PerToken(rows),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn rows(&self) -> &EmbeddingRows {
        &self.rows
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(FormatError::BadMagic(magic));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let n_rows = r.u32()? as usize;
        let dim = r.u32()? as usize;
        let kind = r.u8()?;
        if dim == 0 {
            return Err(FormatError::ZeroDim);
        }
        let rows = match kind {
            0 => {
                let count = n_rows.checked_mul(dim).ok_or(FormatError::Overflow)?;
                EmbeddingRows::PerSentence(r.f32s(count)?)
            }
            1 => {
                // every row costs at least its 4-byte count prefix
                let mut rows = Vec::with_capacity(n_rows.min(r.remaining() / 4));
                for _ in 0..n_rows {
                    let tokens = r.u32()? as usize;
                    let count = tokens.checked_mul(dim).ok_or(FormatError::Overflow)?;
                    rows.push(r.f32s(count)?);
                }
                EmbeddingRows::PerToken(rows)
            }
            other => return Err(FormatError::UnknownKind(other)),
        };
        if r.remaining() != 0 {
            return Err(FormatError::TrailingBytes(r.remaining()));
        }
        Ok(EmbeddingFile { dim, n_rows, rows })
    }

    pub fn encode(&self) -> Vec<u8> {
        let payload = match &self.rows {
            EmbeddingRows::PerSentence(v) => v.len() * 4,
            EmbeddingRows::PerToken(rows) => rows.iter().map(|r| 4 + r.len() * 4).sum(),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        match &self.rows {
            EmbeddingRows::PerSentence(values) => {
                out.push(0);
                extend_f32s(&mut out, values);
            }
            EmbeddingRows::PerToken(rows) => {
                out.push(1);
                for row in rows {
                    out.extend_from_slice(&((row.len() / self.dim) as u32).to_le_bytes());
                    extend_f32s(&mut out, row);
                }
            }
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.encode())
    }
}

fn extend_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if n > self.remaining() {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n - self.remaining(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>, FormatError> {
        let len = count.checked_mul(4).ok_or(FormatError::Overflow)?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }
}
