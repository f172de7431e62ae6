//! Count-based word-for-word translator and its two training signals.
//!
//! The translator keeps one co-occurrence table per direction. Decoding maps
//! each token to its highest-count counterpart (ties: lexicographically
//! smallest), or to [`UNK`] when the token has never been counted. Sentence
//! length is preserved.
//!
//! * [`pp_step`] counts a batch of (pseudo-)parallel pairs into both tables.
//! * [`ibt_step`] back-translates monolingual target sentences with the
//!   reverse table and counts `(translation, original)` into the forward one.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use num_traits::Zero;

use super::ScheduleError;

/// Exact rational count.
pub type Count = Ratio<u64>;

pub const UNK: &str = "<unk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    SrcToTgt,
    TgtToSrc,
}

impl Direction {
    pub fn reverse(self) -> Self {
        match self {
            Direction::SrcToTgt => Direction::TgtToSrc,
            Direction::TgtToSrc => Direction::SrcToTgt,
        }
    }
}

/// Which language a monolingual batch is written in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Src,
    Tgt,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    counts: BTreeMap<String, BTreeMap<String, Count>>,
}

impl CountTable {
    pub fn add(&mut self, from: &str, to: &str, amount: Count) {
        if amount.is_zero() {
            return;
        }
        *self
            .counts
            .entry(from.to_owned())
            .or_default()
            .entry(to.to_owned())
            .or_insert_with(Count::zero) += amount;
    }

    pub fn get(&self, from: &str, to: &str) -> Count {
        self.counts
            .get(from)
            .and_then(|row| row.get(to))
            .copied()
            .unwrap_or_else(Count::zero)
    }

    /// Highest-count target token; ties go to the lexicographically
    /// smallest one.
    pub fn decode(&self, from: &str) -> Option<&str> {
        let row = self.counts.get(from)?;
        let mut best: Option<(&String, &Count)> = None;
        for (to, c) in row {
            // BTreeMap iterates in ascending key order, so strict `>` keeps
            // the smallest key among equal counts.
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((to, c));
            }
        }
        best.map(|(to, _)| to.as_str())
    }

    pub fn total_mass(&self) -> Count {
        self.counts.values().flat_map(|r| r.values()).fold(Count::zero(), |a, b| a + b)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToyTranslator {
    src_to_tgt: CountTable,
    tgt_to_src: CountTable,
    src_vocab: BTreeSet<String>,
    tgt_vocab: BTreeSet<String>,
}

impl ToyTranslator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn table(&self, dir: Direction) -> &CountTable {
        match dir {
            Direction::SrcToTgt => &self.src_to_tgt,
            Direction::TgtToSrc => &self.tgt_to_src,
        }
    }

    fn table_mut(&mut self, dir: Direction) -> &mut CountTable {
        match dir {
            Direction::SrcToTgt => &mut self.src_to_tgt,
            Direction::TgtToSrc => &mut self.tgt_to_src,
        }
    }

    pub fn vocab(&self, side: Side) -> &BTreeSet<String> {
        match side {
            Side::Src => &self.src_vocab,
            Side::Tgt => &self.tgt_vocab,
        }
    }

    pub fn translate_token(&self, token: &str, dir: Direction) -> &str {
        self.table(dir).decode(token).unwrap_or(UNK)
    }

    pub fn translate(&self, sentence: &str, dir: Direction) -> String {
        sentence
            .split_whitespace()
            .map(|t| self.translate_token(t, dir))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Adds one aligned pair to the `dir` table. Equal lengths align by
    /// position; otherwise every source token spreads one unit of mass
    /// evenly over the target tokens. `<unk>` source tokens are skipped.
    fn count_pair(&mut self, dir: Direction, from: &[&str], to: &[&str]) {
        let (from_vocab, to_vocab) = match dir {
            Direction::SrcToTgt => (&mut self.src_vocab, &mut self.tgt_vocab),
            Direction::TgtToSrc => (&mut self.tgt_vocab, &mut self.src_vocab),
        };
        for t in from.iter().filter(|t| **t != UNK) {
            from_vocab.insert((*t).to_owned());
        }
        for t in to {
            to_vocab.insert((*t).to_owned());
        }
        let table = self.table_mut(dir);
        if from.len() == to.len() {
            for (e, f) in from.iter().zip(to) {
                if *e != UNK {
                    table.add(e, f, Count::from_integer(1));
                }
            }
        } else {
            let share = Count::new(1, to.len() as u64);
            for e in from.iter().filter(|e| **e != UNK) {
                for f in to {
                    table.add(e, f, share);
                }
            }
        }
    }
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Supervised update on pseudo-parallel pairs `(src, tgt)`; both direction
/// tables are updated.
pub fn pp_step(model: &mut ToyTranslator, batch: &[(String, String)]) -> Result<(), ScheduleError> {
    if batch.is_empty() {
        return Err(ScheduleError::EmptyBatch);
    }
    for (i, (x, y)) in batch.iter().enumerate() {
        let (xs, ys) = (tokens(x), tokens(y));
        if xs.is_empty() || ys.is_empty() {
            return Err(ScheduleError::EmptySentence { index: i });
        }
        model.count_pair(Direction::SrcToTgt, &xs, &ys);
        model.count_pair(Direction::TgtToSrc, &ys, &xs);
    }
    Ok(())
}

/// Back-translation update. `target` is the language of `mono_batch`; each
/// sentence is translated into the other language with the current model
/// (no updates during inference), then `(translation, sentence)` is counted
/// into the table that translates *into* `target`.
pub fn ibt_step(model: &mut ToyTranslator, mono_batch: &[String], target: Side) -> Result<(), ScheduleError> {
    if mono_batch.is_empty() {
        return Err(ScheduleError::EmptyBatch);
    }
    let train_dir = match target {
        Side::Tgt => Direction::SrcToTgt,
        Side::Src => Direction::TgtToSrc,
    };
    let synthetic: Vec<String> = mono_batch
        .iter()
        .map(|x| model.translate(x, train_dir.reverse()))
        .collect();
    for (i, (x, tx)) in mono_batch.iter().zip(&synthetic).enumerate() {
        let xs = tokens(x);
        if xs.is_empty() {
            return Err(ScheduleError::EmptySentence { index: i });
        }
        model.count_pair(train_dir, &tokens(tx), &xs);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(x: &str, y: &str) -> (String, String) {
        (x.to_string(), y.to_string())
    }

    #[test]
    fn positional_rule() {
        let mut m = ToyTranslator::new();
        pp_step(&mut m, &[pair("a b", "x y")]).unwrap();
        let fwd = m.table(Direction::SrcToTgt);
        assert_eq!(fwd.get("a", "x"), Count::from_integer(1));
        assert_eq!(fwd.get("b", "y"), Count::from_integer(1));
        assert_eq!(fwd.get("a", "y"), Count::zero());
        assert_eq!(m.table(Direction::TgtToSrc).get("y", "b"), Count::from_integer(1));
    }

    #[test]
    fn cross_product_rule() {
        let mut m = ToyTranslator::new();
        pp_step(&mut m, &[pair("a", "x y")]).unwrap();
        let fwd = m.table(Direction::SrcToTgt);
        assert_eq!(fwd.get("a", "x"), Count::new(1, 2));
        assert_eq!(fwd.get("a", "y"), Count::new(1, 2));
        // reverse direction: each target token spreads 1 over the single source token
        assert_eq!(m.table(Direction::TgtToSrc).get("x", "a"), Count::from_integer(1));
    }

    #[test]
    fn pp_step_errors() {
        let mut m = ToyTranslator::new();
        assert_eq!(pp_step(&mut m, &[]), Err(ScheduleError::EmptyBatch));
        assert_eq!(
            pp_step(&mut m, &[pair("a", "x"), pair("  ", "y")]),
            Err(ScheduleError::EmptySentence { index: 1 })
        );
    }

    #[test]
    fn decode_ties_are_lexicographic_and_unknown_is_unk() {
        let mut t = CountTable::default();
        t.add("a", "y", Count::from_integer(2));
        t.add("a", "x", Count::from_integer(2));
        t.add("a", "w", Count::from_integer(1));
        assert_eq!(t.decode("a"), Some("x"));
        assert_eq!(t.decode("b"), None);
        let m = ToyTranslator::new();
        assert_eq!(m.translate("a b", Direction::SrcToTgt), "<unk> <unk>");
    }

    #[test]
    fn cold_start_back_translation_is_a_no_op() {
        let mut m = ToyTranslator::new();
        ibt_step(&mut m, &["x y z".to_string()], Side::Tgt).unwrap();
        ibt_step(&mut m, &["a b".to_string()], Side::Src).unwrap();
        assert!(m.table(Direction::SrcToTgt).is_empty());
        assert!(m.table(Direction::TgtToSrc).is_empty());
    }

    #[test]
    fn back_translation_follows_reverse_argmax() {
        let mut m = ToyTranslator::new();
        m.tgt_to_src.add("x", "a", Count::from_integer(3));
        m.tgt_to_src.add("x", "b", Count::from_integer(1));
        ibt_step(&mut m, &["x".to_string()], Side::Tgt).unwrap();
        assert_eq!(m.table(Direction::SrcToTgt).get("a", "x"), Count::from_integer(1));
        assert_eq!(m.table(Direction::SrcToTgt).get("b", "x"), Count::zero());
        // reverse table untouched
        assert_eq!(m.table(Direction::TgtToSrc).get("x", "a"), Count::from_integer(3));
    }

    #[test]
    fn exact_cipher_training_and_reinforcement() {
        let cipher = |i: usize| format!("t{}", (i * 7 + 3) % 10);
        let pairs: Vec<(String, String)> = (0..50)
            .map(|n| {
                let src: Vec<String> = (0..4).map(|j| format!("s{}", (n + j * 3) % 10)).collect();
                let tgt: Vec<String> = (0..4).map(|j| cipher((n + j * 3) % 10)).collect();
                (src.join(" "), tgt.join(" "))
            })
            .collect();
        let mut m = ToyTranslator::new();
        pp_step(&mut m, &pairs).unwrap();
        for i in 0..10 {
            assert_eq!(m.translate_token(&format!("s{i}"), Direction::SrcToTgt), cipher(i));
        }
        let before = m.table(Direction::SrcToTgt).get("s1", &cipher(1));
        ibt_step(&mut m, &[cipher(1)], Side::Tgt).unwrap();
        assert_eq!(
            m.table(Direction::SrcToTgt).get("s1", &cipher(1)),
            before + Count::from_integer(1)
        );
    }

    proptest! {
        #[test]
        fn pp_step_conserves_mass(
            x in prop::collection::vec(0u8..6, 1..7),
            y in prop::collection::vec(0u8..6, 1..7),
        ) {
            let xs: Vec<String> = x.iter().map(|t| format!("s{t}")).collect();
            let ys: Vec<String> = y.iter().map(|t| format!("t{t}")).collect();
            let mut m = ToyTranslator::new();
            pp_step(&mut m, &[(xs.join(" "), ys.join(" "))]).unwrap();
            // positional: len(x) units; cross-product: 1 per source token
            let expected = Count::from_integer(x.len() as u64);
            prop_assert_eq!(m.table(Direction::SrcToTgt).total_mass(), expected);
            prop_assert_eq!(m.table(Direction::TgtToSrc).total_mass(), Count::from_integer(y.len() as u64));
        }
    }
}
