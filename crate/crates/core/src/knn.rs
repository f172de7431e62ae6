//! Exact k-nearest-neighbour cosine search.
//!
//! [`knn_exact`] walks query blocks x index tiles and keeps a bounded heap
//! per query row; [`knn_oracle`] materialises the full cosine matrix and
//! sorts each row. Both share [`dot`] and the neighbour ordering, so their
//! outputs are identical bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::EmbeddingStore;
use crate::util::format_significant;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KnnError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("index store is empty")]
    EmptyIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: u32,
    pub cosine: f64,
}

/// Ranking used everywhere: higher cosine first, then smaller id.
#[inline]
pub fn rank(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.cosine.total_cmp(&a.cosine).then(a.id.cmp(&b.id))
}

/// Heap entry whose maximum is the worst-ranked neighbour.
#[derive(Clone, Copy)]
struct Worst(Neighbor);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        rank(&self.0, &other.0)
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, n: Neighbor) {
        if self.heap.len() < self.k {
            self.heap.push(Worst(n));
        } else if let Some(top) = self.heap.peek() {
            if rank(&n, &top.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(Worst(n));
            }
        }
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        // ascending by `rank` = best first
        self.heap.into_sorted_vec().into_iter().map(|w| w.0).collect()
    }
}

/// Per-query neighbour lists, each of length `min(k, index size)`, sorted
/// best first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborTable {
    k: usize,
    entries: Vec<Vec<Neighbor>>,
}

impl NeighborTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, query: usize) -> &[Neighbor] {
        &self.entries[query]
    }

    pub fn entries(&self) -> &[Vec<Neighbor>] {
        &self.entries
    }

    /// `query_id<TAB>neighbor_id<TAB>cosine`, cosine at 9 significant digits.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, entry) in self.entries.iter().enumerate() {
            for n in entry {
                let _ = writeln!(out, "{q}\t{}\t{}", n.id, format_significant(n.cosine, 9));
            }
        }
        out
    }
}

/// Query rows x index rows per tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSize {
    pub queries: usize,
    pub index: usize,
}

impl Default for BlockSize {
    fn default() -> Self {
        BlockSize {
            queries: 4096,
            index: 8192,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Cosine of two unit vectors (their dot product).
pub fn cosine(x: &[f32], y: &[f32]) -> Result<f64, KnnError> {
    if x.len() != y.len() {
        return Err(KnnError::DimMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(dot(x, y))
}

fn check(queries: &EmbeddingStore, index: &EmbeddingStore, k: usize) -> Result<(), KnnError> {
    if queries.dim() != index.dim() {
        return Err(KnnError::DimMismatch {
            left: queries.dim(),
            right: index.dim(),
        });
    }
    if k == 0 {
        return Err(KnnError::ZeroK);
    }
    if index.is_empty() {
        return Err(KnnError::EmptyIndex);
    }
    Ok(())
}

pub fn knn_exact(queries: &EmbeddingStore, index: &EmbeddingStore, k: usize) -> Result<NeighborTable, KnnError> {
    knn_exact_blocked(queries, index, k, BlockSize::default())
}

/// Tiled top-k search. Query blocks run in parallel; the merged output does
/// not depend on block sizes or scheduling.
pub fn knn_exact_blocked(
    queries: &EmbeddingStore,
    index: &EmbeddingStore,
    k: usize,
    block: BlockSize,
) -> Result<NeighborTable, KnnError> {
    check(queries, index, k)?;
    let n_index = index.len();
    let keep = k.min(n_index);
    let q_block = block.queries.max(1);
    let i_block = block.index.max(1);

    let starts: Vec<usize> = (0..queries.len()).step_by(q_block).collect();
    let blocks: Vec<Vec<Vec<Neighbor>>> = starts
        .par_iter()
        .map(|&q0| {
            let q1 = (q0 + q_block).min(queries.len());
            let mut heaps: Vec<TopK> = (q0..q1).map(|_| TopK::new(keep)).collect();
            for j0 in (0..n_index).step_by(i_block) {
                let j1 = (j0 + i_block).min(n_index);
                for (heap, q) in heaps.iter_mut().zip(q0..q1) {
                    let qrow = queries.row(q);
                    for j in j0..j1 {
                        heap.offer(Neighbor {
                            id: j as u32,
                            cosine: dot(qrow, index.row(j)),
                        });
                    }
                }
            }
            heaps.into_iter().map(TopK::into_sorted).collect()
        })
        .collect();

    Ok(NeighborTable {
        k,
        entries: blocks.into_iter().flatten().collect(),
    })
}

/// Naive reference: full cosine matrix, per-row sort, truncate.
pub fn knn_oracle(queries: &EmbeddingStore, index: &EmbeddingStore, k: usize) -> Result<NeighborTable, KnnError> {
    check(queries, index, k)?;
    let matrix: Vec<Vec<f64>> = (0..queries.len())
        .map(|q| (0..index.len()).map(|j| dot(queries.row(q), index.row(j))).collect())
        .collect();
    let entries = matrix
        .into_iter()
        .map(|row| {
            let mut all: Vec<Neighbor> = row
                .into_iter()
                .enumerate()
                .map(|(j, cosine)| Neighbor { id: j as u32, cosine })
                .collect();
            all.sort_by(rank);
            all.truncate(k);
            all
        })
        .collect();
    Ok(NeighborTable { k, entries })
}
