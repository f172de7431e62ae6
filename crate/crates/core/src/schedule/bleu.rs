//! Corpus-level BLEU-4 on whitespace tokens, without smoothing.

use std::collections::HashMap;

use super::ScheduleError;

const MAX_ORDER: usize = 4;

/// Per-order clipped matches and hypothesis n-gram totals, plus lengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BleuStats {
    pub matches: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    /// Modified precision per order (`None` where the hypothesis corpus has
    /// no n-grams of that order).
    pub fn precisions(&self) -> [Option<f64>; MAX_ORDER] {
        std::array::from_fn(|n| (self.totals[n] > 0).then(|| self.matches[n] as f64 / self.totals[n] as f64))
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        }
    }

    /// Geometric mean over the orders the hypotheses actually contain,
    /// times the brevity penalty, in `[0, 100]`. Any order with zero matches
    /// gives 0.
    pub fn score(&self) -> f64 {
        let present: Vec<f64> = self.precisions().into_iter().flatten().collect();
        if present.is_empty() || present.contains(&0.0) {
            return 0.0;
        }
        let log_mean = present.iter().map(|p| p.ln()).sum::<f64>() / present.len() as f64;
        (100.0 * self.brevity_penalty() * log_mean.exp()).clamp(0.0, 100.0)
    }
}

fn ngram_counts<'t>(tokens: &'t [&'t str], n: usize) -> HashMap<&'t [&'t str], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

pub fn bleu_stats<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<BleuStats, ScheduleError> {
    if hypotheses.len() != references.len() {
        return Err(ScheduleError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (i, (h, r)) in hypotheses.iter().zip(references).enumerate() {
        let hyp: Vec<&str> = h.as_ref().split_whitespace().collect();
        let reference: Vec<&str> = r.as_ref().split_whitespace().collect();
        if reference.is_empty() {
            return Err(ScheduleError::EmptyReference { index: i });
        }
        stats.hyp_len += hyp.len();
        stats.ref_len += reference.len();
        for n in 1..=MAX_ORDER {
            if hyp.len() < n {
                continue;
            }
            let ref_counts = ngram_counts(&reference, n);
            for (gram, count) in ngram_counts(&hyp, n) {
                stats.matches[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            stats.totals[n - 1] += hyp.len() + 1 - n;
        }
    }
    Ok(stats)
}

/// Corpus BLEU in `[0, 100]`.
pub fn toy_bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64, ScheduleError> {
    Ok(bleu_stats(hypotheses, references)?.score())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_disjoint() {
        let h = ["the cat sat on the mat", "a b"];
        assert_eq!(toy_bleu(&h, &h).unwrap(), 100.0);
        assert_eq!(toy_bleu(&["x y z w"], &["a b c d"]).unwrap(), 0.0);
    }

    #[test]
    fn hand_counted_example() {
        let stats = bleu_stats(&["a b c d"], &["a b c e"]).unwrap();
        assert_eq!(stats.matches, [3, 2, 1, 0]);
        assert_eq!(stats.totals, [4, 3, 2, 1]);
        assert_eq!(stats.precisions(), [Some(0.75), Some(2.0 / 3.0), Some(0.5), Some(0.0)]);
        assert_eq!(stats.score(), 0.0);
    }

    #[test]
    fn clipping_and_brevity() {
        // "the the the the" vs "the cat": unigram clipped to 1/4
        let stats = bleu_stats(&["the the the the"], &["the cat"]).unwrap();
        assert_eq!(stats.matches[0], 1);
        // short hypothesis: BP = exp(1 - 6/3)
        let stats = bleu_stats(&["a b c"], &["a b c d e f"]).unwrap();
        assert!((stats.brevity_penalty() - (-1.0f64).exp()).abs() < 1e-12);
        assert!((stats.score() - 100.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            toy_bleu(&["a"], &["a", "b"]),
            Err(ScheduleError::LengthMismatch { hypotheses: 1, references: 2 })
        ));
        assert!(matches!(toy_bleu(&["a"], &[" "]), Err(ScheduleError::EmptyReference { index: 0 })));
    }

    proptest! {
        #[test]
        fn bounded_and_identity(
            corpus in prop::collection::vec(prop::collection::vec(0u8..5, 1..8), 1..6),
            other in prop::collection::vec(prop::collection::vec(0u8..5, 0..8), 1..6),
        ) {
            let refs: Vec<String> = corpus.iter().map(|s| s.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ")).collect();
            prop_assert_eq!(toy_bleu(&refs, &refs).unwrap(), 100.0);
            let hyps: Vec<String> = (0..refs.len())
                .map(|i| other.get(i).map(|s| s.iter().map(|t| format!("w{t}")).collect::<Vec<_>>().join(" ")).unwrap_or_default())
                .collect();
            let b = toy_bleu(&hyps, &refs).unwrap();
            prop_assert!((0.0..=100.0).contains(&b));
        }
    }
}
