//! Synthetic cipher language pairs.
//!
//! Source tokens `s0..s{V-1}` are drawn from a Zipf distribution; the target
//! language is a seeded random bijection `s_i -> t_{perm[i]}`, so exact
//! translation is known for every sentence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use super::ScheduleError;
use crate::corpus::Corpus;

#[derive(Debug, Clone, PartialEq)]
pub struct CipherTaskSpec {
    pub vocab_size: usize,
    /// Sentences per monolingual corpus.
    pub n_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Pseudo-parallel pairs, taken from the source monolingual corpus.
    pub pp_size: usize,
    /// Held-out exact validation pairs.
    pub valid_size: usize,
    /// Probability that a pseudo-parallel target token is resampled
    /// uniformly from the target vocabulary.
    pub noise_rate: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for CipherTaskSpec {
    fn default() -> Self {
        CipherTaskSpec {
            vocab_size: 50,
            n_sentences: 500,
            min_len: 4,
            max_len: 10,
            pp_size: 100,
            valid_size: 100,
            noise_rate: 0.3,
            zipf_exponent: 1.0,
            seed: 2023,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CipherTask {
    pub mono_src: Corpus,
    pub mono_tgt: Corpus,
    pub pp: Vec<(String, String)>,
    pub valid: Vec<(String, String)>,
    /// `cipher[i]` is the target index of source token `s{i}`.
    pub cipher: Vec<usize>,
}

impl CipherTask {
    /// Exact translation of a source sentence.
    pub fn encipher(&self, src: &str) -> String {
        src.split_whitespace()
            .map(|t| {
                let i: usize = t[1..].parse().expect("cipher token");
                tgt_token(self.cipher[i])
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn src_token(i: usize) -> String {
    format!("s{i}")
}

pub fn tgt_token(i: usize) -> String {
    format!("t{i}")
}

pub fn make_cipher_task(spec: &CipherTaskSpec) -> Result<CipherTask, ScheduleError> {
    let degenerate = |reason: &str| ScheduleError::InvalidTask(reason.to_string());
    if spec.vocab_size < 2 {
        return Err(degenerate("vocab_size must be at least 2"));
    }
    if spec.min_len == 0 || spec.min_len > spec.max_len {
        return Err(degenerate("length range must satisfy 1 <= min_len <= max_len"));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(degenerate("noise_rate must lie in [0, 1]"));
    }
    if spec.n_sentences == 0 || spec.valid_size == 0 {
        return Err(degenerate("corpora and validation set must be non-empty"));
    }
    if spec.pp_size > spec.n_sentences {
        return Err(degenerate("pp_size cannot exceed n_sentences"));
    }
    if spec.zipf_exponent.is_nan() || spec.zipf_exponent < 0.0 {
        return Err(degenerate("zipf_exponent must be non-negative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut cipher: Vec<usize> = (0..spec.vocab_size).collect();
    cipher.shuffle(&mut rng);

    let zipf = Zipf::new(spec.vocab_size as f64, spec.zipf_exponent).map_err(|e| degenerate(&e.to_string()))?;
    let sentence = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.random_range(spec.min_len..=spec.max_len);
        (0..len).map(|_| zipf.sample(rng) as usize - 1).collect()
    };
    let render = |ids: &[usize], token: fn(usize) -> String| ids.iter().map(|&i| token(i)).collect::<Vec<_>>().join(" ");

    let src_ids: Vec<Vec<usize>> = (0..spec.n_sentences).map(|_| sentence(&mut rng)).collect();
    let tgt_ids: Vec<Vec<usize>> = (0..spec.n_sentences).map(|_| sentence(&mut rng)).collect();
    let valid_ids: Vec<Vec<usize>> = (0..spec.valid_size).map(|_| sentence(&mut rng)).collect();
    let encipher = |ids: &[usize]| ids.iter().map(|&i| cipher[i]).collect::<Vec<_>>();

    let mono_src = Corpus::new("src", src_ids.iter().map(|s| render(s, src_token)).collect())
        .expect("sentences are non-empty");
    let mono_tgt = Corpus::new("tgt", tgt_ids.iter().map(|s| render(&encipher(s), tgt_token)).collect())
        .expect("sentences are non-empty");

    let pp = src_ids[..spec.pp_size]
        .iter()
        .map(|s| {
            let noisy: Vec<usize> = encipher(s)
                .into_iter()
                .map(|t| {
                    if rng.random_bool(spec.noise_rate) {
                        rng.random_range(0..spec.vocab_size)
                    } else {
                        t
                    }
                })
                .collect();
            (render(s, src_token), render(&noisy, tgt_token))
        })
        .collect();
    let valid = valid_ids
        .iter()
        .map(|s| (render(s, src_token), render(&encipher(s), tgt_token)))
        .collect();

    Ok(CipherTask {
        mono_src,
        mono_tgt,
        pp,
        valid,
        cipher,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_pp_is_exact() {
        let task = make_cipher_task(&CipherTaskSpec {
            noise_rate: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(task.pp.len(), 100);
        for (s, t) in &task.pp {
            assert_eq!(&task.encipher(s), t);
        }
        for (s, t) in &task.valid {
            assert_eq!(&task.encipher(s), t);
        }
    }

    #[test]
    fn full_noise_decouples_targets() {
        let task = make_cipher_task(&CipherTaskSpec {
            noise_rate: 1.0,
            ..Default::default()
        })
        .unwrap();
        let (mut same, mut total) = (0usize, 0usize);
        for (s, t) in &task.pp {
            let exact = task.encipher(s);
            for (a, b) in exact.split(' ').zip(t.split(' ')) {
                same += usize::from(a == b);
                total += 1;
            }
            assert_eq!(exact.split(' ').count(), t.split(' ').count());
        }
        // uniform resampling hits the right token about 1/50 of the time
        assert!((same as f64 / total as f64) < 0.1, "{same}/{total}");
    }

    #[test]
    fn regeneration_is_deterministic() {
        let spec = CipherTaskSpec {
            vocab_size: 50,
            n_sentences: 500,
            noise_rate: 0.3,
            seed: 11,
            ..Default::default()
        };
        assert_eq!(make_cipher_task(&spec).unwrap(), make_cipher_task(&spec).unwrap());
        let other = CipherTaskSpec { seed: 12, ..spec };
        assert_ne!(make_cipher_task(&other).unwrap().mono_src, make_cipher_task(&CipherTaskSpec { seed: 11, ..other.clone() }).unwrap().mono_src);
    }

    #[test]
    fn cipher_is_a_bijection() {
        let task = make_cipher_task(&CipherTaskSpec::default()).unwrap();
        let mut sorted = task.cipher.clone();
        sorted.sort();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let bad = [
            CipherTaskSpec { vocab_size: 1, ..Default::default() },
            CipherTaskSpec { min_len: 0, ..Default::default() },
            CipherTaskSpec { min_len: 5, max_len: 4, ..Default::default() },
            CipherTaskSpec { noise_rate: 1.5, ..Default::default() },
            CipherTaskSpec { pp_size: 600, ..Default::default() },
        ];
        for spec in bad {
            assert!(matches!(make_cipher_task(&spec), Err(ScheduleError::InvalidTask(_))), "{spec:?}");
        }
    }
}
