//! Monolingual corpora, gold pair sets, and planted PSM task construction.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid UTF-8")]
    InvalidUtf8 { line: usize },
    #[error("line {line}: empty sentence")]
    EmptyLine { line: usize },
    #[error("gold line {line}: {reason}")]
    GoldParse { line: usize, reason: String },
    #[error("gold pair ({src}, {tgt}) references an id outside the corpora ({src_len} x {tgt_len})")]
    GoldOutOfRange {
        src: u32,
        tgt: u32,
        src_len: usize,
        tgt_len: usize,
    },
    #[error("gold pairs are not one-to-one: {side} id {id} appears twice")]
    GoldNotBijective { side: &'static str, id: u32 },
    #[error("sample size {sample_size} exceeds corpus size {corpus_size} ({language})")]
    SampleTooLarge {
        sample_size: usize,
        corpus_size: usize,
        language: String,
    },
    #[error("gold parallel set is empty")]
    EmptyGold,
}

/// An ordered list of sentences in one language. Sentence ids are the
/// positions `0..len()` in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    language: String,
    sentences: Vec<String>,
}

impl Corpus {
    /// Builds a corpus from in-memory sentences. Sentences must be non-empty.
    pub fn new(language: impl Into<String>, sentences: Vec<String>) -> Result<Self, CorpusError> {
        if let Some(pos) = sentences.iter().position(|s| s.is_empty()) {
            return Err(CorpusError::EmptyLine { line: pos + 1 });
        }
        Ok(Corpus {
            language: language.into(),
            sentences,
        })
    }

    /// Parses LF-separated UTF-8 text, one sentence per line. A single final
    /// LF is a terminator, not an empty trailing sentence. Bytes are kept
    /// as given (no trimming of `\r` or whitespace).
    pub fn from_bytes(bytes: &[u8], language: impl Into<String>) -> Result<Self, CorpusError> {
        let body = bytes.strip_suffix(b"\n").unwrap_or(bytes);
        let mut sentences = Vec::new();
        if !bytes.is_empty() {
            for (i, raw) in body.split(|&b| b == b'\n').enumerate() {
                let line = i + 1;
                if raw.is_empty() {
                    return Err(CorpusError::EmptyLine { line });
                }
                let s = std::str::from_utf8(raw).map_err(|_| CorpusError::InvalidUtf8 { line })?;
                sentences.push(s.to_owned());
            }
        }
        Ok(Corpus {
            language: language.into(),
            sentences,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentence(&self, id: usize) -> Option<&str> {
        self.sentences.get(id).map(String::as_str)
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn ids(&self) -> std::ops::Range<usize> {
        0..self.sentences.len()
    }

    /// One sentence per line, LF-terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(s);
            out.push('\n');
        }
        out
    }
}

/// Reads a corpus file: UTF-8, one sentence per line.
pub fn load_corpus(path: impl AsRef<Path>, language: &str) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Corpus::from_bytes(&bytes, language)
}

/// A one-to-one set of `(src_id, tgt_id)` gold pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldPairSet {
    pairs: Vec<(u32, u32)>,
    lookup: HashSet<(u32, u32)>,
}

impl GoldPairSet {
    /// Validates that the pairs form a partial bijection. Pairs are stored
    /// sorted by source id.
    pub fn new(mut pairs: Vec<(u32, u32)>) -> Result<Self, CorpusError> {
        pairs.sort_unstable();
        let mut seen_src = HashSet::with_capacity(pairs.len());
        let mut seen_tgt = HashSet::with_capacity(pairs.len());
        for &(s, t) in &pairs {
            if !seen_src.insert(s) {
                return Err(CorpusError::GoldNotBijective { side: "source", id: s });
            }
            if !seen_tgt.insert(t) {
                return Err(CorpusError::GoldNotBijective { side: "target", id: t });
            }
        }
        let lookup = pairs.iter().copied().collect();
        Ok(GoldPairSet { pairs, lookup })
    }

    /// Checks every referenced id against the corpus sizes.
    pub fn check_bounds(&self, src_len: usize, tgt_len: usize) -> Result<(), CorpusError> {
        for &(src, tgt) in &self.pairs {
            if src as usize >= src_len || tgt as usize >= tgt_len {
                return Err(CorpusError::GoldOutOfRange {
                    src,
                    tgt,
                    src_len,
                    tgt_len,
                });
            }
        }
        Ok(())
    }

    /// Parses `src_id<TAB>tgt_id` lines. Blank lines are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, CorpusError> {
        let pairs = parse_id_pairs(text)?;
        Self::new(pairs)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            let _ = writeln!(out, "{s}\t{t}");
        }
        out
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, src: u32, tgt: u32) -> bool {
        self.lookup.contains(&(src, tgt))
    }
}

/// Parses tab-separated `src_id<TAB>tgt_id` lines without any bijection
/// check. Used for gold files and plain predicted-pair files.
pub fn parse_id_pairs(text: &str) -> Result<Vec<(u32, u32)>, CorpusError> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(CorpusError::GoldParse {
                line: line_no,
                reason: "expected two tab-separated columns".into(),
            });
        };
        let parse = |s: &str| {
            s.trim().parse::<u32>().map_err(|e| CorpusError::GoldParse {
                line: line_no,
                reason: format!("{s:?}: {e}"),
            })
        };
        pairs.push((parse(a)?, parse(b)?));
    }
    Ok(pairs)
}

/// A planted PSM instance: two corpora and the gold pairs hidden in them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsmTask {
    pub src: Corpus,
    pub tgt: Corpus,
    pub gold: GoldPairSet,
}

#[derive(Clone, Copy)]
enum Origin {
    Sample(usize),
    Gold(usize),
}

/// Samples `sample_size` sentences from each monolingual corpus (seeded
/// shuffle of ids, without replacement), mixes in every gold pair, and
/// shuffles each side independently. Duplicates are kept as distinct ids.
pub fn plant_psm_task(
    mono_src: &Corpus,
    mono_tgt: &Corpus,
    gold: &[(String, String)],
    sample_size: usize,
    seed: u64,
) -> Result<PsmTask, CorpusError> {
    if gold.is_empty() {
        return Err(CorpusError::EmptyGold);
    }
    for corpus in [mono_src, mono_tgt] {
        if sample_size > corpus.len() {
            return Err(CorpusError::SampleTooLarge {
                sample_size,
                corpus_size: corpus.len(),
                language: corpus.language.clone(),
            });
        }
    }
    if let Some(pos) = gold.iter().position(|(s, t)| s.is_empty() || t.is_empty()) {
        return Err(CorpusError::EmptyLine { line: pos + 1 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut side = |corpus: &Corpus, pick: fn(&(String, String)) -> &String| {
        let mut ids: Vec<usize> = corpus.ids().collect();
        ids.shuffle(&mut rng);
        ids.truncate(sample_size);
        let mut slots: Vec<Origin> = ids.into_iter().map(Origin::Sample).collect();
        slots.extend((0..gold.len()).map(Origin::Gold));
        slots.shuffle(&mut rng);

        let mut gold_pos = vec![0u32; gold.len()];
        let sentences = slots
            .iter()
            .enumerate()
            .map(|(pos, origin)| match *origin {
                Origin::Sample(id) => corpus.sentences[id].clone(),
                Origin::Gold(g) => {
                    gold_pos[g] = pos as u32;
                    pick(&gold[g]).clone()
                }
            })
            .collect();
        (
            Corpus {
                language: corpus.language.clone(),
                sentences,
            },
            gold_pos,
        )
    };

    let (src, src_pos) = side(mono_src, |p| &p.0);
    let (tgt, tgt_pos) = side(mono_tgt, |p| &p.1);
    let gold = GoldPairSet::new(src_pos.into_iter().zip(tgt_pos).collect())?;
    Ok(PsmTask { src, tgt, gold })
}
