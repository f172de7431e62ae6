use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pseudopar::corpus::{load_corpus, parse_id_pairs, plant_psm_task, GoldPairSet};
use pseudopar::error::read_text_file;
use pseudopar::knn::knn_exact;
use pseudopar::pipeline::{load_inputs, mine_with_details, parse_config_text, MiningConfig, ThresholdSetting};
use pseudopar::schedule::{run_cipher_schedule, CipherTaskSpec, Mode, SchedulePlan, SwitchCriterion};
use pseudopar::scoring::{parse_scored_tsv, scored_pairs_to_tsv};
use pseudopar::{calibrate_threshold, psm_eval, score_candidates, Error, Result};

/// Margin-based pseudo-parallel mining, PSM evaluation and the toy schedule lab.
#[derive(Parser)]
#[command(name = "pseudopar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine a pseudo-parallel corpus (`xsim<TAB>src<TAB>tgt`).
    Mine {
        #[command(flatten)]
        common: MiningArgs,
        /// Also write `xsim<TAB>src_id<TAB>tgt_id` for the mined pairs.
        #[arg(long)]
        pairs_out: Option<PathBuf>,
    },
    /// Sweep thresholds against a gold set and report P/R/F1 per grid point.
    Calibrate {
        #[command(flatten)]
        common: MiningArgs,
    },
    /// Score predicted id pairs against a gold set.
    PsmEval {
        /// Predicted pairs: `src_id<TAB>tgt_id` or `xsim<TAB>src_id<TAB>tgt_id`.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump exact k-nearest neighbours of every source row among target rows.
    KnnDump {
        #[command(flatten)]
        common: MiningArgs,
        /// Query with target rows against the source side instead.
        #[arg(long)]
        reverse: bool,
    },
    /// Plant gold pairs into samples of two monolingual corpora.
    Plant {
        #[arg(long)]
        src_corpus: PathBuf,
        #[arg(long)]
        tgt_corpus: PathBuf,
        /// Parallel sentences, `src<TAB>tgt` per line.
        #[arg(long)]
        parallel: PathBuf,
        #[arg(long)]
        sample_size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving `src.txt`, `tgt.txt` and `gold.tsv`.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train the toy translator on a synthetic cipher task under one schedule.
    ScheduleRun(ScheduleArgs),
}

/// Flags shared by the mining subcommands; each overrides the same key from `--config`.
#[derive(Args, Default)]
struct MiningArgs {
    /// Flat `key = value` file; flags win over its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    src_corpus: Option<String>,
    #[arg(long)]
    tgt_corpus: Option<String>,
    #[arg(long)]
    src_emb: Option<String>,
    #[arg(long)]
    tgt_emb: Option<String>,
    #[arg(long)]
    src_lang: Option<String>,
    #[arg(long)]
    tgt_lang: Option<String>,
    #[arg(long)]
    k: Option<String>,
    /// A positive number, or `calibrate` (needs `--gold`).
    #[arg(long)]
    threshold: Option<String>,
    /// `forward-backward-union` or `exhaustive`.
    #[arg(long)]
    strategy: Option<String>,
    /// `one-to-one-greedy`, `best-per-source` or `many-to-many`.
    #[arg(long)]
    matching: Option<String>,
    /// `observed`, `uniform:START,STOP,STEP` or `list:T1,T2,...`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    gold: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl MiningArgs {
    fn config(&self) -> Result<MiningConfig> {
        let mut entries: Vec<(String, String)> = match &self.config {
            Some(path) => parse_config_text(&read_text_file(path)?)?,
            None => Vec::new(),
        };
        let flags = [
            ("src-corpus", &self.src_corpus),
            ("tgt-corpus", &self.tgt_corpus),
            ("src-emb", &self.src_emb),
            ("tgt-emb", &self.tgt_emb),
            ("src-lang", &self.src_lang),
            ("tgt-lang", &self.tgt_lang),
            ("k", &self.k),
            ("threshold", &self.threshold),
            ("strategy", &self.strategy),
            ("matching", &self.matching),
            ("grid", &self.grid),
            ("gold", &self.gold),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        entries.extend(flags.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))));
        Ok(MiningConfig::from_entries(entries.iter().map(|(k, v)| (k.as_str(), v.as_str())))?)
    }
}

#[derive(Args)]
struct ScheduleArgs {
    /// `IBT`, `PseudoPar`, `IBT+PseudoPar` or `IBT+PseudoPar->IBT`.
    #[arg(long, default_value = "IBT+PseudoPar->IBT")]
    mode: String,
    #[arg(long, default_value_t = 50)]
    vocab: usize,
    /// Sentences per monolingual corpus.
    #[arg(long, default_value_t = 500)]
    sentences: usize,
    #[arg(long, default_value_t = 100)]
    pp_size: usize,
    #[arg(long, default_value_t = 100)]
    valid_size: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// `step:N` or `plateau:P,DELTA`.
    #[arg(long, default_value = "plateau:5,0.1")]
    switch: String,
    #[arg(long, default_value_t = 400)]
    max_steps: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    #[arg(long, default_value_t = 2023)]
    seed: u64,
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(path) => std::fs::write(path, content).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Mine { common, pairs_out } => {
            let config = common.config()?;
            let (corpus, mined) = mine_with_details(&config)?;
            emit(config.out.as_deref(), &corpus.to_tsv())?;
            if let Some(path) = pairs_out {
                emit(Some(&path), &scored_pairs_to_tsv(&mined.pairs))?;
            }
            let mut summary = format!(
                "mined {} pairs from {} candidates ({} degenerate) at threshold {:.6}",
                corpus.len(),
                mined.candidates,
                mined.degenerate,
                mined.threshold
            );
            if let Some(report) = &mined.calibration {
                summary.push_str(&format!("; calibrated {}", report.best()));
            }
            eprintln!("{summary}");
        }
        Command::Calibrate { common } => {
            let mut config = common.config()?;
            config.options.threshold = ThresholdSetting::Calibrate;
            if config.gold.is_none() {
                return Err(pseudopar::pipeline::ConfigError::Missing("gold").into());
            }
            let inputs = load_inputs(&config)?;
            let gold = inputs.gold.as_ref().expect("gold was requested");
            let scored = score_candidates(&inputs.src_store, &inputs.tgt_store, config.options.k, config.options.strategy)?;
            let report = calibrate_threshold(&scored.pairs, gold, &config.options.grid)?;
            emit(config.out.as_deref(), &report.to_tsv())?;
            eprintln!("best threshold {:.6}: {}", report.best_threshold, report.best());
        }
        Command::PsmEval { pred, gold, out } => {
            let gold = GoldPairSet::parse_tsv(&read_text_file(&gold)?)?;
            let text = read_text_file(&pred)?;
            let columns = text.lines().find(|l| !l.trim().is_empty()).map_or(2, |l| l.split('\t').count());
            let predicted: Vec<(u32, u32)> = if columns == 3 {
                parse_scored_tsv(&text)?.into_iter().map(|p| (p.src_id, p.tgt_id)).collect()
            } else {
                parse_id_pairs(&text)?
            };
            emit(out.as_deref(), &format!("{}\n", psm_eval(predicted, &gold)))?;
        }
        Command::KnnDump { common, reverse } => {
            let config = common.config()?;
            let inputs = load_inputs(&config)?;
            let (queries, index) = if reverse {
                (&inputs.tgt_store, &inputs.src_store)
            } else {
                (&inputs.src_store, &inputs.tgt_store)
            };
            let table = knn_exact(queries, index, config.options.k.min(index.len()))?;
            emit(config.out.as_deref(), &table.to_tsv())?;
        }
        Command::Plant {
            src_corpus,
            tgt_corpus,
            parallel,
            sample_size,
            seed,
            out_dir,
        } => {
            let mono_src = load_corpus(&src_corpus, "src")?;
            let mono_tgt = load_corpus(&tgt_corpus, "tgt")?;
            let pairs = parse_parallel(&read_text_file(&parallel)?, &parallel)?;
            let task = plant_psm_task(&mono_src, &mono_tgt, &pairs, sample_size, seed)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            emit(Some(&out_dir.join("src.txt")), &task.src.to_text())?;
            emit(Some(&out_dir.join("tgt.txt")), &task.tgt.to_text())?;
            emit(Some(&out_dir.join("gold.tsv")), &task.gold.to_tsv())?;
            eprintln!(
                "planted {} gold pairs among {} source and {} target sentences",
                task.gold.len(),
                task.src.len(),
                task.tgt.len()
            );
        }
        Command::ScheduleRun(args) => {
            let plan = SchedulePlan {
                mode: args.mode.parse::<Mode>()?,
                switch: args.switch.parse::<SwitchCriterion>()?,
                max_steps: args.max_steps,
                batch_size: args.batch_size,
                eval_every: args.eval_every,
                skip_pp: false,
            };
            let spec = CipherTaskSpec {
                vocab_size: args.vocab,
                n_sentences: args.sentences,
                pp_size: args.pp_size,
                valid_size: args.valid_size,
                noise_rate: args.noise,
                seed: args.seed,
                ..Default::default()
            };
            let (_, trace) = run_cipher_schedule(&plan, &spec)?;
            emit(args.trace_out.as_deref(), &trace.to_tsv())?;
            let last = trace.last().expect("step 0 is always evaluated");
            let switch = trace.switch_step.map_or_else(|| "none".to_string(), |s| s.to_string());
            eprintln!(
                "{} after {} steps: bleu_fwd {:.2} bleu_bwd {:.2} (switch: {switch})",
                plan.mode, last.step, last.bleu_fwd, last.bleu_bwd
            );
        }
    }
    Ok(())
}

fn parse_parallel(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            line.split_once('\t')
                .map(|(s, t)| (s.to_string(), t.to_string()))
                .ok_or_else(|| {
                    Error::io(
                        path,
                        std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            format!("line {}: expected `src<TAB>tgt`", i + 1),
                        ),
                    )
                })
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("error\tusage\t{first}");
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
