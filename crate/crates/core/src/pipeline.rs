//! End-to-end mining: load, search, score, threshold, match, emit.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::calibration::{calibrate_threshold, CalibrationReport, ThresholdGrid};
use crate::corpus::{load_corpus, Corpus, GoldPairSet};
use crate::embedding::{build_store, load_embeddings, EmbeddingStore};
use crate::error::Result;
use crate::scoring::{score_candidates, CandidateStrategy, ScoredPair};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("missing required setting {0}")]
    Missing(&'static str),
    #[error("threshold = calibrate needs a gold pair set")]
    CalibrateWithoutGold,
}

/// Parses flat `key = value` lines. `#` starts a comment line; blank lines
/// are ignored. Keys are lower-cased with `_` folded to `-`.
pub fn parse_config_text(text: &str) -> std::result::Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Matching {
    ManyToMany,
    BestPerSource,
    #[default]
    OneToOneGreedy,
}

impl FromStr for Matching {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "many-to-many" => Ok(Matching::ManyToMany),
            "best-per-source" => Ok(Matching::BestPerSource),
            "one-to-one-greedy" | "one-to-one" => Ok(Matching::OneToOneGreedy),
            other => Err(format!("unknown matching rule {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSetting {
    Fixed(f64),
    Calibrate,
}

impl FromStr for ThresholdSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "calibrate" {
            return Ok(ThresholdSetting::Calibrate);
        }
        let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if t.is_nan() || t <= 0.0 || t.is_infinite() {
            return Err("threshold must be positive".into());
        }
        Ok(ThresholdSetting::Fixed(t))
    }
}

/// Scoring-level knobs shared by the library entry points and the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct MiningOptions {
    pub k: usize,
    pub threshold: ThresholdSetting,
    pub strategy: CandidateStrategy,
    pub matching: Matching,
    pub grid: ThresholdGrid,
}

impl Default for MiningOptions {
    fn default() -> Self {
        MiningOptions {
            k: 4,
            threshold: ThresholdSetting::Calibrate,
            strategy: CandidateStrategy::default(),
            matching: Matching::default(),
            grid: ThresholdGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MiningConfig {
    pub options: MiningOptions,
    pub src_corpus: Option<PathBuf>,
    pub tgt_corpus: Option<PathBuf>,
    pub src_emb: Option<PathBuf>,
    pub tgt_emb: Option<PathBuf>,
    pub src_lang: String,
    pub tgt_lang: String,
    pub gold: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl MiningConfig {
    /// Applies `key = value` settings in order; later entries win.
    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> std::result::Result<Self, ConfigError> {
        let mut cfg = MiningConfig {
            src_lang: "src".into(),
            tgt_lang: "tgt".into(),
            ..Default::default()
        };
        for (key, value) in entries {
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), ConfigError> {
        let key = normalize_key(key);
        let bad = |reason: String| ConfigError::BadValue {
            key: key.clone(),
            value: value.to_string(),
            reason,
        };
        let path = || Some(PathBuf::from(value));
        match key.as_str() {
            "k" => {
                let k: usize = value.parse().map_err(|e| bad(format!("{e}")))?;
                if k == 0 {
                    return Err(bad("k must be at least 1".into()));
                }
                self.options.k = k;
            }
            "threshold" => self.options.threshold = value.parse().map_err(bad)?,
            "strategy" => self.options.strategy = value.parse().map_err(bad)?,
            "matching" => self.options.matching = value.parse().map_err(bad)?,
            "grid" => self.options.grid = value.parse().map_err(|e| bad(format!("{e}")))?,
            "seed" => self.seed = value.parse().map_err(|e| bad(format!("{e}")))?,
            "src-corpus" => self.src_corpus = path(),
            "tgt-corpus" => self.tgt_corpus = path(),
            "src-emb" => self.src_emb = path(),
            "tgt-emb" => self.tgt_emb = path(),
            "src-lang" => self.src_lang = value.to_string(),
            "tgt-lang" => self.tgt_lang = value.to_string(),
            "gold" => self.gold = path(),
            "out" => self.out = path(),
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }
}

/// Keeps pairs according to `matching`. Many-to-many returns the input
/// unchanged; the other rules return pairs ranked by xsim (descending, ties
/// by `(src_id, tgt_id)`).
pub fn dedupe(pairs: &[ScoredPair], matching: Matching) -> Vec<ScoredPair> {
    if matching == Matching::ManyToMany {
        return pairs.to_vec();
    }
    let mut ranked = pairs.to_vec();
    sort_by_score(&mut ranked);
    let mut used_src = HashSet::new();
    let mut used_tgt = HashSet::new();
    ranked
        .into_iter()
        .filter(|p| match matching {
            Matching::BestPerSource => used_src.insert(p.src_id),
            Matching::OneToOneGreedy => {
                if used_src.contains(&p.src_id) || used_tgt.contains(&p.tgt_id) {
                    false
                } else {
                    used_src.insert(p.src_id);
                    used_tgt.insert(p.tgt_id);
                    true
                }
            }
            Matching::ManyToMany => unreachable!(),
        })
        .collect()
}

fn sort_by_score(pairs: &mut [ScoredPair]) {
    pairs.sort_by(|a, b| {
        b.xsim
            .total_cmp(&a.xsim)
            .then(a.src_id.cmp(&b.src_id))
            .then(a.tgt_id.cmp(&b.tgt_id))
    });
}

/// Output of [`mine_stores`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinedPairs {
    /// Surviving pairs, xsim descending.
    pub pairs: Vec<ScoredPair>,
    pub threshold: f64,
    pub calibration: Option<CalibrationReport>,
    /// Candidates scored (finite xsim).
    pub candidates: usize,
    /// Candidates dropped for a non-positive margin denominator.
    pub degenerate: usize,
}

/// Scores candidates, applies `xsim > T` (fixed or calibrated on `gold`),
/// then the matching rule.
pub fn mine_stores(
    src: &EmbeddingStore,
    tgt: &EmbeddingStore,
    options: &MiningOptions,
    gold: Option<&GoldPairSet>,
) -> Result<MinedPairs> {
    let scored = score_candidates(src, tgt, options.k, options.strategy)?;
    let (threshold, calibration) = match options.threshold {
        ThresholdSetting::Fixed(t) => (t, None),
        ThresholdSetting::Calibrate => {
            let gold = gold.ok_or(ConfigError::CalibrateWithoutGold)?;
            let report = calibrate_threshold(&scored.pairs, gold, &options.grid)?;
            (report.best_threshold, Some(report))
        }
    };
    let kept: Vec<ScoredPair> = scored.pairs.iter().copied().filter(|p| p.xsim > threshold).collect();
    let mut pairs = dedupe(&kept, options.matching);
    sort_by_score(&mut pairs);
    Ok(MinedPairs {
        pairs,
        threshold,
        calibration,
        candidates: scored.pairs.len(),
        degenerate: scored.degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinedPair {
    pub src_id: u32,
    pub tgt_id: u32,
    pub src: String,
    pub tgt: String,
    pub xsim: f64,
}

/// Mined sentence pairs, xsim descending.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoParallelCorpus {
    pub pairs: Vec<MinedPair>,
    pub threshold: f64,
}

impl PseudoParallelCorpus {
    pub fn from_mined(mined: &MinedPairs, src: &Corpus, tgt: &Corpus) -> Self {
        let pairs = mined
            .pairs
            .iter()
            .map(|p| MinedPair {
                src_id: p.src_id,
                tgt_id: p.tgt_id,
                src: src.sentences()[p.src_id as usize].clone(),
                tgt: tgt.sentences()[p.tgt_id as usize].clone(),
                xsim: p.xsim,
            })
            .collect();
        PseudoParallelCorpus {
            pairs,
            threshold: mined.threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `xsim<TAB>src_sentence<TAB>tgt_sentence`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for p in &self.pairs {
            let _ = writeln!(out, "{:.6}\t{}\t{}", p.xsim, p.src, p.tgt);
        }
        out
    }

    pub fn sentence_pairs(&self) -> Vec<(String, String)> {
        self.pairs.iter().map(|p| (p.src.clone(), p.tgt.clone())).collect()
    }
}

/// Everything [`mine`] loads from disk.
pub struct MiningInputs {
    pub src: Corpus,
    pub tgt: Corpus,
    pub src_store: EmbeddingStore,
    pub tgt_store: EmbeddingStore,
    pub gold: Option<GoldPairSet>,
}

pub fn load_inputs(config: &MiningConfig) -> Result<MiningInputs> {
    let need = |p: &Option<PathBuf>, name: &'static str| p.clone().ok_or(ConfigError::Missing(name));
    let src = load_corpus(need(&config.src_corpus, "src-corpus")?, &config.src_lang)?;
    let tgt = load_corpus(need(&config.tgt_corpus, "tgt-corpus")?, &config.tgt_lang)?;
    let src_store = build_store(&src, &load_embeddings(need(&config.src_emb, "src-emb")?)?)?;
    let tgt_store = build_store(&tgt, &load_embeddings(need(&config.tgt_emb, "tgt-emb")?)?)?;
    let gold = match &config.gold {
        Some(path) => {
            let text = crate::error::read_text_file(path)?;
            let gold = GoldPairSet::parse_tsv(&text)?;
            gold.check_bounds(src.len(), tgt.len())?;
            Some(gold)
        }
        None => None,
    };
    Ok(MiningInputs {
        src,
        tgt,
        src_store,
        tgt_store,
        gold,
    })
}

/// Loads corpora and embeddings named in `config` and mines them.
pub fn mine(config: &MiningConfig) -> Result<PseudoParallelCorpus> {
    Ok(mine_with_details(config)?.0)
}

pub fn mine_with_details(config: &MiningConfig) -> Result<(PseudoParallelCorpus, MinedPairs)> {
    if config.options.threshold == ThresholdSetting::Calibrate && config.gold.is_none() {
        return Err(ConfigError::CalibrateWithoutGold.into());
    }
    let inputs = load_inputs(config)?;
    let mined = mine_stores(&inputs.src_store, &inputs.tgt_store, &config.options, inputs.gold.as_ref())?;
    Ok((PseudoParallelCorpus::from_mined(&mined, &inputs.src, &inputs.tgt), mined))
}
