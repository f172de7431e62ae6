//! Pseudo-parallel corpus mining.
//!
//! The crate covers three things:
//!
//! * mining sentence pairs from two monolingual corpora with the ratio-margin
//!   cross-lingual similarity (`xsim`) over exact k-nearest-neighbour search,
//! * calibrating the mining threshold on a planted parallel-sentence-mining
//!   (PSM) task by maximising F1,
//! * a small, deterministic laboratory for pseudo-parallel / back-translation
//!   fine-tuning schedules driven by a count-based toy translator.
//!
//! Everything is deterministic given its inputs and seed.

pub mod calibration;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod knn;
pub mod pipeline;
pub mod schedule;
pub mod scoring;
mod util;

pub use calibration::{calibrate_threshold, psm_eval, CalibrationReport, PsmMetrics, ThresholdGrid};
pub use corpus::{load_corpus, plant_psm_task, Corpus, GoldPairSet, PsmTask};
pub use embedding::{build_store, mean_pool, normalize, EmbeddingFile, EmbeddingStore};
pub use error::{Error, Result};
pub use knn::{cosine, knn_exact, knn_oracle, Neighbor, NeighborTable};
pub use pipeline::{dedupe, mine, Matching, MiningConfig, PseudoParallelCorpus};
pub use scoring::{score_candidates, xsim, CandidateStrategy, MarginParams, ScoredPair};
