//! PSM precision/recall and F1-maximising threshold selection.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::GoldPairSet;
use crate::scoring::ScoredPair;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalibrationError {
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error("invalid grid spec {0:?}")]
    BadGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsmMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl PsmMetrics {
    /// Precision is 0 when nothing is predicted; F1 is 0 when P + R = 0.
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(true_positives, predicted);
        let recall = ratio(true_positives, gold);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PsmMetrics {
            precision,
            recall,
            f1,
            true_positives,
            predicted,
            gold,
        }
    }
}

/// Percentages with two decimals, e.g. `P=87.08 R=76.15 F1=81.25`.
impl fmt::Display for PsmMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P={} R={} F1={}",
            percent(self.precision),
            percent(self.recall),
            percent(self.f1)
        )
    }
}

/// `0.8708 -> "87.08"`.
pub fn percent(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Set-intersection precision/recall of predicted pairs against gold.
/// Duplicate predictions count once.
pub fn psm_eval(predicted: impl IntoIterator<Item = (u32, u32)>, gold: &GoldPairSet) -> PsmMetrics {
    let predicted: HashSet<(u32, u32)> = predicted.into_iter().collect();
    let tp = predicted.iter().filter(|&&(s, t)| gold.contains(s, t)).count();
    PsmMetrics::from_counts(tp, predicted.len(), gold.len())
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum ThresholdGrid {
    /// Every distinct observed score, the midpoints between neighbouring
    /// scores, and the largest float below the minimum score.
    #[default]
    Observed,
    /// `start, start + step, ...` up to `stop` inclusive.
    Uniform { start: f64, stop: f64, step: f64 },
    Explicit(Vec<f64>),
}

impl ThresholdGrid {
    /// Largest number of points a uniform grid may expand to.
    pub const MAX_UNIFORM_POINTS: usize = 10_000_000;

    pub const TABLE_RANGE: ThresholdGrid = ThresholdGrid::Uniform {
        start: 1.0,
        stop: 1.2,
        step: 0.001,
    };

    /// Sorted ascending, deduplicated, finite.
    pub fn thresholds(&self, scores: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = match self {
            ThresholdGrid::Observed => {
                let mut s: Vec<f64> = scores.iter().copied().filter(|x| x.is_finite()).collect();
                s.sort_by(f64::total_cmp);
                s.dedup();
                let mut grid = Vec::with_capacity(2 * s.len() + 1);
                if let Some(&min) = s.first() {
                    grid.push(min.next_down());
                }
                for w in s.windows(2) {
                    grid.push(w[0]);
                    grid.push(w[0] + (w[1] - w[0]) / 2.0);
                }
                grid.extend(s.last());
                grid
            }
            ThresholdGrid::Uniform { start, stop, step } => {
                match uniform_steps(*start, *stop, *step) {
                    Some(n) => (0..=n).map(|i| start + i as f64 * step).collect(),
                    None => Vec::new(),
                }
            }
            ThresholdGrid::Explicit(v) => v.clone(),
        };
        out.retain(|x| x.is_finite());
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

/// Number of steps after `start`, or `None` for a non-finite, empty or
/// oversized grid.
fn uniform_steps(start: f64, stop: f64, step: f64) -> Option<usize> {
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && stop >= start) {
        return None;
    }
    let n = ((stop - start) / step + 1e-9).floor();
    (n.is_finite() && n < ThresholdGrid::MAX_UNIFORM_POINTS as f64).then_some(n as usize)
}

impl FromStr for ThresholdGrid {
    type Err = CalibrationError;

    /// `observed`, `uniform:START,STOP,STEP`, or `list:T1,T2,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CalibrationError::BadGrid(s.to_string());
        let floats = |body: &str| -> Result<Vec<f64>, CalibrationError> {
            body.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match s.split_once(':') {
            None if s == "observed" => Ok(ThresholdGrid::Observed),
            Some(("uniform", body)) => match floats(body)?[..] {
                [start, stop, step] if uniform_steps(start, stop, step).is_some() => {
                    Ok(ThresholdGrid::Uniform { start, stop, step })
                }
                _ => Err(bad()),
            },
            Some(("list", body)) => {
                let list = floats(body)?;
                if list.iter().any(|t| !t.is_finite()) {
                    return Err(bad());
                }
                Ok(ThresholdGrid::Explicit(list))
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// Ascending by threshold.
    pub grid: Vec<(f64, PsmMetrics)>,
    pub best_threshold: f64,
    pub best_f1: f64,
}

impl CalibrationReport {
    pub fn best(&self) -> &PsmMetrics {
        &self
            .grid
            .iter()
            .find(|(t, _)| *t == self.best_threshold)
            .expect("best threshold is a grid point")
            .1
    }

    /// Header `threshold precision recall f1` (tab-separated), one row per
    /// grid point, footer `BEST T P R F1`. Metrics are percentages.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("threshold\tprecision\trecall\tf1\n");
        let row = |out: &mut String, label: Option<&str>, t: f64, m: &PsmMetrics| {
            if let Some(label) = label {
                out.push_str(label);
                out.push('\t');
            }
            let _ = writeln!(
                out,
                "{t:.6}\t{}\t{}\t{}",
                percent(m.precision),
                percent(m.recall),
                percent(m.f1)
            );
        };
        for (t, m) in &self.grid {
            row(&mut out, None, *t, m);
        }
        row(&mut out, Some("BEST"), self.best_threshold, self.best());
        out
    }
}

/// Evaluates strict thresholding (`xsim > T`) at every grid
/// point with one sort and one sweep, and picks the F1 maximiser (ties go to
/// the larger threshold).
pub fn calibrate_threshold(
    scored: &[ScoredPair],
    gold: &GoldPairSet,
    grid: &ThresholdGrid,
) -> Result<CalibrationReport, CalibrationError> {
    // one score per distinct pair
    let mut best_per_pair: HashMap<(u32, u32), f64> = HashMap::with_capacity(scored.len());
    for p in scored {
        let e = best_per_pair.entry((p.src_id, p.tgt_id)).or_insert(p.xsim);
        if p.xsim > *e {
            *e = p.xsim;
        }
    }
    let mut ranked: Vec<(f64, bool)> = best_per_pair
        .into_iter()
        .map(|((s, t), x)| (x, gold.contains(s, t)))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let scores: Vec<f64> = ranked.iter().map(|r| r.0).collect();
    let thresholds = grid.thresholds(&scores);
    if thresholds.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }

    let mut rows = Vec::with_capacity(thresholds.len());
    let (mut predicted, mut tp) = (0usize, 0usize);
    for &t in thresholds.iter().rev() {
        while predicted < ranked.len() && ranked[predicted].0 > t {
            tp += usize::from(ranked[predicted].1);
            predicted += 1;
        }
        rows.push((t, PsmMetrics::from_counts(tp, predicted, gold.len())));
    }
    rows.reverse();

    let (best_threshold, best_f1) = rows
        .iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(bt, bf), (t, m)| {
            if m.f1 > bf || (m.f1 == bf && *t > bt) {
                (*t, m.f1)
            } else {
                (bt, bf)
            }
        });
    Ok(CalibrationReport {
        grid: rows,
        best_threshold,
        best_f1,
    })
}
