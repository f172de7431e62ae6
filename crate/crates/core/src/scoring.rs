//! Ratio-margin cross-lingual similarity (`xsim`) and candidate scoring.
//!
//! ```text
//! xsim(x, y) = cos(x, y) / ( sum_{z in NN_k(x)} cos(x, z) / 2k + sum_{z in NN_k(y)} cos(y, z) / 2k )
//! ```
//!
//! `NN_k(x)` are the `k` nearest neighbours of `x` in the opposite corpus.
//! When a corpus has fewer than `k` sentences each side divides by twice
//! its effective neighbourhood size, so a neighbourhood with uniform cosine
//! always contributes half of that cosine.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::embedding::EmbeddingStore;
use crate::knn::{dot, knn_exact, KnnError, Neighbor, NeighborTable};

/// Denominators at or below this give a pair the sentinel score `-inf`.
pub const MIN_DENOMINATOR: f64 = 1e-12;

/// Neighbourhood size used for candidate retrieval in union mode is at least
/// this large.
pub const MIN_CANDIDATE_K: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarginParams {
    pub k: usize,
}

impl Default for MarginParams {
    fn default() -> Self {
        MarginParams { k: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateStrategy {
    /// `x` against its retrieval neighbours plus `y` against its own,
    /// deduplicated.
    #[default]
    ForwardBackwardUnion,
    /// Every source x target pair.
    Exhaustive,
}

impl FromStr for CandidateStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward-backward-union" | "union" => Ok(CandidateStrategy::ForwardBackwardUnion),
            "exhaustive" => Ok(CandidateStrategy::Exhaustive),
            other => Err(format!("unknown candidate strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub src_id: u32,
    pub tgt_id: u32,
    pub xsim: f64,
}

/// Half the mean cosine over the first `min(k, len)` neighbours.
pub fn neighborhood_term(neighbors: &[Neighbor], k: usize) -> f64 {
    let used = &neighbors[..k.min(neighbors.len())];
    if used.is_empty() {
        return 0.0;
    }
    let denom = 2.0 * used.len() as f64;
    used.iter().map(|n| n.cosine / denom).sum()
}

#[inline]
fn ratio_margin(cos_xy: f64, term_x: f64, term_y: f64) -> f64 {
    let denominator = term_x + term_y;
    if denominator <= MIN_DENOMINATOR {
        f64::NEG_INFINITY
    } else {
        cos_xy / denominator
    }
}

/// Margin score of a pair given its cosine and both neighbourhoods.
/// Returns `-inf` when the denominator is not positive.
pub fn xsim(cos_xy: f64, nn_x: &[Neighbor], nn_y: &[Neighbor], params: MarginParams) -> f64 {
    ratio_margin(cos_xy, neighborhood_term(nn_x, params.k), neighborhood_term(nn_y, params.k))
}

/// Neighbour tables in both directions plus the per-sentence denominator
/// terms they induce.
#[derive(Debug, Clone)]
pub struct MarginScorer<'a> {
    src: &'a EmbeddingStore,
    tgt: &'a EmbeddingStore,
    forward: NeighborTable,
    backward: NeighborTable,
    src_terms: Vec<f64>,
    tgt_terms: Vec<f64>,
}

impl<'a> MarginScorer<'a> {
    /// Searches `retrieval_k >= params.k` neighbours each way; the margin
    /// uses only the first `params.k`.
    pub fn new(
        src: &'a EmbeddingStore,
        tgt: &'a EmbeddingStore,
        params: MarginParams,
        retrieval_k: usize,
    ) -> Result<Self, KnnError> {
        if params.k == 0 {
            return Err(KnnError::ZeroK);
        }
        let retrieval_k = retrieval_k.max(params.k);
        let forward = knn_exact(src, tgt, retrieval_k)?;
        let backward = knn_exact(tgt, src, retrieval_k)?;
        let src_terms = forward.entries().iter().map(|e| neighborhood_term(e, params.k)).collect();
        let tgt_terms = backward.entries().iter().map(|e| neighborhood_term(e, params.k)).collect();
        Ok(MarginScorer {
            src,
            tgt,
            forward,
            backward,
            src_terms,
            tgt_terms,
        })
    }

    pub fn forward(&self) -> &NeighborTable {
        &self.forward
    }

    pub fn backward(&self) -> &NeighborTable {
        &self.backward
    }

    #[inline]
    pub fn score(&self, src_id: usize, tgt_id: usize) -> f64 {
        let cos = dot(self.src.row(src_id), self.tgt.row(tgt_id));
        ratio_margin(cos, self.src_terms[src_id], self.tgt_terms[tgt_id])
    }

    fn candidates(&self, strategy: CandidateStrategy) -> Vec<(u32, u32)> {
        match strategy {
            CandidateStrategy::Exhaustive => {
                let m = self.tgt.len() as u32;
                (0..self.src.len() as u32)
                    .flat_map(|i| (0..m).map(move |j| (i, j)))
                    .collect()
            }
            CandidateStrategy::ForwardBackwardUnion => {
                let mut pairs: Vec<(u32, u32)> = self
                    .forward
                    .entries()
                    .iter()
                    .enumerate()
                    .flat_map(|(i, e)| e.iter().map(move |n| (i as u32, n.id)))
                    .chain(
                        self.backward
                            .entries()
                            .iter()
                            .enumerate()
                            .flat_map(|(j, e)| e.iter().map(move |n| (n.id, j as u32))),
                    )
                    .collect();
                pairs.par_sort_unstable();
                pairs.dedup();
                pairs
            }
        }
    }

    /// Scores every candidate of `strategy`, sorted by `(src_id, tgt_id)`.
    pub fn score_all(&self, strategy: CandidateStrategy) -> CandidateScores {
        let scored: Vec<ScoredPair> = self
            .candidates(strategy)
            .into_par_iter()
            .map(|(s, t)| ScoredPair {
                src_id: s,
                tgt_id: t,
                xsim: self.score(s as usize, t as usize),
            })
            .collect();
        let total = scored.len();
        let pairs: Vec<ScoredPair> = scored.into_iter().filter(|p| p.xsim.is_finite()).collect();
        CandidateScores {
            degenerate: total - pairs.len(),
            pairs,
        }
    }
}

/// Scored candidates plus the number of pairs dropped for a degenerate
/// denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScores {
    pub pairs: Vec<ScoredPair>,
    pub degenerate: usize,
}

pub fn score_candidates(
    src: &EmbeddingStore,
    tgt: &EmbeddingStore,
    k: usize,
    strategy: CandidateStrategy,
) -> Result<CandidateScores, KnnError> {
    let params = MarginParams { k };
    let retrieval_k = match strategy {
        CandidateStrategy::ForwardBackwardUnion => k.max(MIN_CANDIDATE_K),
        CandidateStrategy::Exhaustive => k,
    };
    Ok(MarginScorer::new(src, tgt, params, retrieval_k)?.score_all(strategy))
}

/// `xsim<TAB>src_id<TAB>tgt_id`, score at 6 decimals.
pub fn scored_pairs_to_tsv(pairs: &[ScoredPair]) -> String {
    let mut out = String::new();
    for p in pairs {
        let _ = writeln!(out, "{:.6}\t{}\t{}", p.xsim, p.src_id, p.tgt_id);
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("scored pairs line {line}: {reason}")]
pub struct ParseScoredError {
    pub line: usize,
    pub reason: String,
}

/// Inverse of [`scored_pairs_to_tsv`] (scores come back rounded).
pub fn parse_scored_tsv(text: &str) -> Result<Vec<ScoredPair>, ParseScoredError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| ParseScoredError { line: i + 1, reason };
        let cols: Vec<&str> = line.split('\t').collect();
        let [score, src, tgt] = cols[..] else {
            return Err(err(format!("expected 3 columns, found {}", cols.len())));
        };
        let xsim: f64 = score.trim().parse().map_err(|e| err(format!("score {score:?}: {e}")))?;
        let src_id: u32 = src.trim().parse().map_err(|e| err(format!("src id {src:?}: {e}")))?;
        let tgt_id: u32 = tgt.trim().parse().map_err(|e| err(format!("tgt id {tgt:?}: {e}")))?;
        out.push(ScoredPair { src_id, tgt_id, xsim });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nb(cosines: &[f64]) -> Vec<Neighbor> {
        cosines
            .iter()
            .enumerate()
            .map(|(i, &c)| Neighbor { id: i as u32, cosine: c })
            .collect()
    }

    fn random_store(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> EmbeddingStore {
        let raw: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        EmbeddingStore::from_raw("x", dim, &raw).unwrap()
    }

    /// Direct transcription of the margin formula over a full cosine matrix.
    fn brute_force_xsim(src: &EmbeddingStore, tgt: &EmbeddingStore, k: usize) -> Vec<Vec<f64>> {
        let cos = |a: &[f32], b: &[f32]| -> f64 {
            let mut s = 0.0f64;
            for i in 0..a.len() {
                s += a[i] as f64 * b[i] as f64;
            }
            s
        };
        let n = src.len();
        let m = tgt.len();
        let c: Vec<Vec<f64>> = (0..n).map(|i| (0..m).map(|j| cos(src.row(i), tgt.row(j))).collect()).collect();
        let avg_top = |mut v: Vec<f64>| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let kk = k.min(v.len());
            v[..kk].iter().sum::<f64>() / (2.0 * kk as f64)
        };
        let rx: Vec<f64> = (0..n).map(|i| avg_top(c[i].clone())).collect();
        let ry: Vec<f64> = (0..m).map(|j| avg_top((0..n).map(|i| c[i][j]).collect())).collect();
        (0..n)
            .map(|i| (0..m).map(|j| c[i][j] / (rx[i] + ry[j])).collect())
            .collect()
    }

    #[test]
    fn uniform_neighbourhood_gives_one() {
        let c = 0.42;
        let v = xsim(c, &nb(&[c; 4]), &nb(&[c; 4]), MarginParams { k: 4 });
        assert!((v - 1.0).abs() < 1e-12);
        // clamped neighbourhoods keep the same property
        let v = xsim(c, &nb(&[c; 2]), &nb(&[c; 3]), MarginParams { k: 4 });
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_k1() {
        // 0.9 / (0.8/2 + 0.7/2) = 0.9 / 0.75
        let v = xsim(0.9, &nb(&[0.8]), &nb(&[0.7]), MarginParams { k: 1 });
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn only_the_first_k_neighbours_count() {
        let v = xsim(0.9, &nb(&[0.8, 0.1, 0.0]), &nb(&[0.7, -0.5]), MarginParams { k: 1 });
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominator_is_sentinel() {
        let v = xsim(0.0, &nb(&[0.0, 0.0]), &nb(&[0.0, 0.0]), MarginParams { k: 2 });
        assert_eq!(v, f64::NEG_INFINITY);
        // orthogonal stores: every pair dropped and counted
        let a = EmbeddingStore::from_raw("a", 2, &[1.0, 0.0]).unwrap();
        let b = EmbeddingStore::from_raw("b", 2, &[0.0, 1.0]).unwrap();
        let scored = score_candidates(&a, &b, 1, CandidateStrategy::Exhaustive).unwrap();
        assert!(scored.pairs.is_empty());
        assert_eq!(scored.degenerate, 1);
    }

    #[test]
    fn neighbourhood_offset_suppresses_hubs() {
        let base = nb(&[0.5, 0.4, 0.3]);
        let shifted = nb(&[0.6, 0.5, 0.4]);
        let other = nb(&[0.2, 0.1, 0.1]);
        let p = MarginParams { k: 3 };
        assert!(xsim(0.7, &shifted, &other, p) < xsim(0.7, &base, &other, p));
    }

    #[test]
    fn singleton_corpora() {
        let a = EmbeddingStore::from_raw("a", 2, &[1.0, 0.3]).unwrap();
        let b = EmbeddingStore::from_raw("b", 2, &[0.8, 0.5]).unwrap();
        for strategy in [CandidateStrategy::ForwardBackwardUnion, CandidateStrategy::Exhaustive] {
            let scored = score_candidates(&a, &b, 4, strategy).unwrap();
            assert_eq!(scored.pairs.len(), 1);
            assert!((scored.pairs[0].xsim - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_stores_prefer_self_pairs() {
        let raw = [1.0, 0.1, 0.0, 0.2, 1.0, 0.1, 0.0, 0.3, 1.0];
        let s = EmbeddingStore::from_raw("x", 3, &raw).unwrap();
        let scored = score_candidates(&s, &s, 2, CandidateStrategy::ForwardBackwardUnion).unwrap();
        let oracle = brute_force_xsim(&s, &s, 2);
        for i in 0..3u32 {
            let own = scored.pairs.iter().find(|p| p.src_id == i && p.tgt_id == i).unwrap();
            for p in scored.pairs.iter().filter(|p| p.src_id == i || p.tgt_id == i) {
                assert!(own.xsim >= p.xsim);
            }
            for j in 0..3 {
                assert!(oracle[i as usize][i as usize] >= oracle[i as usize][j]);
            }
        }
    }

    #[test]
    fn random_instance_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let src = random_store(&mut rng, 20, 8);
        let tgt = random_store(&mut rng, 20, 8);
        let oracle = brute_force_xsim(&src, &tgt, 4);
        for strategy in [CandidateStrategy::ForwardBackwardUnion, CandidateStrategy::Exhaustive] {
            let scored = score_candidates(&src, &tgt, 4, strategy).unwrap();
            if strategy == CandidateStrategy::Exhaustive {
                assert_eq!(scored.pairs.len() + scored.degenerate, 400);
            }
            for p in &scored.pairs {
                let want = oracle[p.src_id as usize][p.tgt_id as usize];
                assert!((p.xsim - want).abs() <= 1e-9 * want.abs().max(1.0), "{p:?} vs {want}");
            }
            assert!(scored.pairs.windows(2).all(|w| (w[0].src_id, w[0].tgt_id) < (w[1].src_id, w[1].tgt_id)));
        }
    }

    #[test]
    fn tsv_roundtrip() {
        let pairs = vec![
            ScoredPair { src_id: 3, tgt_id: 9, xsim: 1.0341234 },
            ScoredPair { src_id: 0, tgt_id: 1, xsim: 0.5 },
        ];
        let text = scored_pairs_to_tsv(&pairs);
        assert_eq!(text, "1.034123\t3\t9\n0.500000\t0\t1\n");
        let back = parse_scored_tsv(&text).unwrap();
        assert_eq!(back[0].src_id, 3);
        assert_eq!(back[1].xsim, 0.5);
        assert!(parse_scored_tsv("1.0\t2\n").is_err());
        assert!(parse_scored_tsv("x\t2\t3\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn xsim_is_symmetric_under_exchange(seed in any::<u64>(), n in 1usize..12, m in 1usize..12, k in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_store(&mut rng, n, 5);
            let b = random_store(&mut rng, m, 5);
            let ab = MarginScorer::new(&a, &b, MarginParams { k }, k).unwrap();
            let ba = MarginScorer::new(&b, &a, MarginParams { k }, k).unwrap();
            for i in 0..n {
                for j in 0..m {
                    let x = ab.score(i, j);
                    let y = ba.score(j, i);
                    if x.is_finite() || y.is_finite() {
                        prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
                    }
                }
            }
        }
    }
}
