//! Fine-tuning schedule laboratory.
//!
//! A [`SchedulePlan`] decides, step by step, which training signal the toy
//! translator receives: iterative back-translation on both monolingual
//! corpora, a supervised pseudo-parallel batch, both, or both until a switch
//! point and back-translation only afterwards.

pub mod bleu;
pub mod cipher;
pub mod translator;

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use bleu::toy_bleu;
pub use cipher::{make_cipher_task, CipherTask, CipherTaskSpec};
pub use translator::{ibt_step, pp_step, Direction, Side, ToyTranslator};

use crate::corpus::Corpus;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("sentence {index} in batch is empty")]
    EmptySentence { index: usize },
    #[error("{hypotheses} hypotheses for {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("reference {index} is empty")]
    EmptyReference { index: usize },
    #[error("invalid cipher task: {0}")]
    InvalidTask(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("mode {0} needs a non-empty pseudo-parallel corpus")]
    EmptyPseudoParallel(Mode),
    #[error("mode {0} needs non-empty monolingual corpora")]
    EmptyMonolingual(Mode),
    #[error("validation set is empty")]
    EmptyValidation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Ibt,
    PseudoPar,
    IbtPseudoPar,
    IbtPseudoParThenIbt,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Ibt => "IBT",
            Mode::PseudoPar => "PseudoPar",
            Mode::IbtPseudoPar => "IBT+PseudoPar",
            Mode::IbtPseudoParThenIbt => "IBT+PseudoPar->IBT",
        }
    }

    fn uses_pp(self) -> bool {
        !matches!(self, Mode::Ibt)
    }

    fn uses_ibt(self) -> bool {
        !matches!(self, Mode::PseudoPar)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.to_ascii_lowercase().replace(['_', ' '], "");
        match folded.as_str() {
            "ibt" => Ok(Mode::Ibt),
            "pseudopar" | "pp" => Ok(Mode::PseudoPar),
            "ibt+pseudopar" | "ibtpseudopar" => Ok(Mode::IbtPseudoPar),
            "ibt+pseudopar->ibt" | "ibtpseudoparthenibt" | "ibt+pseudopar↦ibt" => Ok(Mode::IbtPseudoParThenIbt),
            _ => Err(ScheduleError::InvalidPlan(format!("unknown mode {s:?}"))),
        }
    }
}

/// When `IBT+PseudoPar->IBT` drops the pseudo-parallel batches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchCriterion {
    /// After step `n` completes.
    FixedStep(usize),
    /// When forward validation BLEU has not improved on its best value by
    /// more than `min_delta` for `patience` consecutive evaluations.
    Plateau { patience: usize, min_delta: f64 },
}

impl Default for SwitchCriterion {
    fn default() -> Self {
        SwitchCriterion::Plateau {
            patience: 5,
            min_delta: 0.1,
        }
    }
}

impl FromStr for SwitchCriterion {
    type Err = ScheduleError;

    /// `step:N` or `plateau:P,DELTA`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScheduleError::InvalidPlan(format!("bad switch spec {s:?}"));
        match s.split_once(':') {
            Some(("step", n)) => Ok(SwitchCriterion::FixedStep(n.trim().parse().map_err(|_| bad())?)),
            Some(("plateau", body)) => {
                let (p, d) = body.split_once(',').ok_or_else(bad)?;
                let patience: usize = p.trim().parse().map_err(|_| bad())?;
                let min_delta: f64 = d.trim().parse().map_err(|_| bad())?;
                if patience == 0 || !min_delta.is_finite() || min_delta < 0.0 {
                    return Err(bad());
                }
                Ok(SwitchCriterion::Plateau { patience, min_delta })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePlan {
    pub mode: Mode,
    pub switch: SwitchCriterion,
    pub max_steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    /// Diagnostic: never draw pseudo-parallel batches even when the mode
    /// asks for them.
    pub skip_pp: bool,
}

impl Default for SchedulePlan {
    fn default() -> Self {
        SchedulePlan {
            mode: Mode::IbtPseudoParThenIbt,
            switch: SwitchCriterion::default(),
            max_steps: 400,
            batch_size: 16,
            eval_every: 10,
            skip_pp: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    /// Regime that produced the model evaluated here.
    pub mode: Mode,
    pub bleu_fwd: f64,
    pub bleu_bwd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BatchKind {
    PseudoParallel,
    MonoSrc,
    MonoTgt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    /// Step after which pseudo-parallel batches stopped, if a switch fired.
    pub switch_step: Option<usize>,
    /// Every batch consumed, in order.
    pub batch_log: Vec<(usize, BatchKind)>,
}

impl TrainTrace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// Header `step mode bleu_fwd bleu_bwd`, tab-separated, BLEU at 2 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tmode\tbleu_fwd\tbleu_bwd\n");
        for r in &self.records {
            let _ = writeln!(out, "{}\t{}\t{:.2}\t{:.2}", r.step, r.mode, r.bleu_fwd, r.bleu_bwd);
        }
        out
    }
}

/// Endless shuffled pass over `0..len`, reshuffled every epoch.
struct BatchStream {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    fn new(len: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        BatchStream { order, cursor: 0, rng }
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(size);
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
        out
    }
}

/// Forward and backward toy BLEU of `model` on `valid`.
pub fn evaluate(model: &ToyTranslator, valid: &[(String, String)]) -> Result<(f64, f64), ScheduleError> {
    let fwd: Vec<String> = valid.iter().map(|(s, _)| model.translate(s, Direction::SrcToTgt)).collect();
    let bwd: Vec<String> = valid.iter().map(|(_, t)| model.translate(t, Direction::TgtToSrc)).collect();
    let refs_tgt: Vec<&str> = valid.iter().map(|(_, t)| t.as_str()).collect();
    let refs_src: Vec<&str> = valid.iter().map(|(s, _)| s.as_str()).collect();
    Ok((toy_bleu(&fwd, &refs_tgt)?, toy_bleu(&bwd, &refs_src)?))
}

fn validate(
    plan: &SchedulePlan,
    mono_src: &Corpus,
    mono_tgt: &Corpus,
    pp: &[(String, String)],
    valid: &[(String, String)],
) -> Result<(), ScheduleError> {
    let invalid = |m: &str| Err(ScheduleError::InvalidPlan(m.to_string()));
    if plan.max_steps == 0 {
        return invalid("max_steps must be at least 1");
    }
    if plan.batch_size == 0 {
        return invalid("batch_size must be at least 1");
    }
    if plan.eval_every == 0 {
        return invalid("eval_every must be at least 1");
    }
    if plan.mode == Mode::IbtPseudoParThenIbt {
        if let SwitchCriterion::FixedStep(s) = plan.switch {
            if s == 0 || s >= plan.max_steps {
                return invalid("fixed switch step must lie in 1..max_steps");
            }
        }
    }
    if plan.mode.uses_pp() && pp.is_empty() {
        return Err(ScheduleError::EmptyPseudoParallel(plan.mode));
    }
    if plan.mode.uses_ibt() && (mono_src.is_empty() || mono_tgt.is_empty()) {
        return Err(ScheduleError::EmptyMonolingual(plan.mode));
    }
    if valid.is_empty() {
        return Err(ScheduleError::EmptyValidation);
    }
    Ok(())
}

/// Trains a fresh [`ToyTranslator`] under `plan` and records validation
/// BLEU at step 0, every `eval_every` steps, and at the last step.
///
/// Each data stream (pseudo-parallel, source mono, target mono) has its own
/// seeded shuffle, so a stream's draws do not depend on whether the others
/// are consumed.
pub fn run_schedule(
    plan: &SchedulePlan,
    mono_src: &Corpus,
    mono_tgt: &Corpus,
    pp: &[(String, String)],
    valid: &[(String, String)],
    seed: u64,
) -> Result<TrainTrace, ScheduleError> {
    validate(plan, mono_src, mono_tgt, pp, valid)?;

    let mut model = ToyTranslator::new();
    let mut pp_stream = BatchStream::new(pp.len(), seed, 1);
    let mut src_stream = BatchStream::new(mono_src.len(), seed, 2);
    let mut tgt_stream = BatchStream::new(mono_tgt.len(), seed, 3);

    let mut active = match plan.mode {
        Mode::IbtPseudoParThenIbt => Mode::IbtPseudoPar,
        m => m,
    };
    let mut trace = TrainTrace {
        records: Vec::new(),
        switch_step: None,
        batch_log: Vec::new(),
    };

    let (fwd, bwd) = evaluate(&model, valid)?;
    trace.records.push(TraceRecord {
        step: 0,
        mode: active,
        bleu_fwd: fwd,
        bleu_bwd: bwd,
    });
    let mut best_fwd = fwd;
    let mut stale = 0usize;

    for step in 1..=plan.max_steps {
        if active.uses_pp() && !plan.skip_pp {
            let batch: Vec<(String, String)> = pp_stream
                .next_batch(plan.batch_size)
                .into_iter()
                .map(|i| pp[i].clone())
                .collect();
            pp_step(&mut model, &batch)?;
            trace.batch_log.push((step, BatchKind::PseudoParallel));
        }
        if active.uses_ibt() {
            let tgt_batch: Vec<String> = tgt_stream
                .next_batch(plan.batch_size)
                .into_iter()
                .map(|i| mono_tgt.sentences()[i].clone())
                .collect();
            ibt_step(&mut model, &tgt_batch, Side::Tgt)?;
            trace.batch_log.push((step, BatchKind::MonoTgt));
            let src_batch: Vec<String> = src_stream
                .next_batch(plan.batch_size)
                .into_iter()
                .map(|i| mono_src.sentences()[i].clone())
                .collect();
            ibt_step(&mut model, &src_batch, Side::Src)?;
            trace.batch_log.push((step, BatchKind::MonoSrc));
        }

        let mut switch_now = false;
        if step % plan.eval_every == 0 || step == plan.max_steps {
            let (fwd, bwd) = evaluate(&model, valid)?;
            trace.records.push(TraceRecord {
                step,
                mode: active,
                bleu_fwd: fwd,
                bleu_bwd: bwd,
            });
            if fwd > best_fwd + plateau_delta(plan.switch) {
                best_fwd = fwd;
                stale = 0;
            } else {
                stale += 1;
            }
            if let SwitchCriterion::Plateau { patience, .. } = plan.switch {
                switch_now = stale >= patience;
            }
        }
        if let SwitchCriterion::FixedStep(s) = plan.switch {
            switch_now = step == s;
        }
        if switch_now && plan.mode == Mode::IbtPseudoParThenIbt && trace.switch_step.is_none() {
            active = Mode::Ibt;
            trace.switch_step = Some(step);
        }
    }
    Ok(trace)
}

fn plateau_delta(switch: SwitchCriterion) -> f64 {
    match switch {
        SwitchCriterion::Plateau { min_delta, .. } => min_delta,
        SwitchCriterion::FixedStep(_) => 0.0,
    }
}

/// Cipher task plus plan, as driven by the `schedule-run` command.
pub fn run_cipher_schedule(
    plan: &SchedulePlan,
    task_spec: &CipherTaskSpec,
) -> Result<(CipherTask, TrainTrace), ScheduleError> {
    let task = make_cipher_task(task_spec)?;
    let trace = run_schedule(plan, &task.mono_src, &task.mono_tgt, &task.pp, &task.valid, task_spec.seed)?;
    Ok((task, trace))
}
