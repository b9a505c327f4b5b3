//! The six operator commands over typed configurations.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use reportlabel_core::augment::{augment_dataset, select_items, AugmentOptions, Backtranslate, DictionaryStub, IdentityStub, TranslationConfig};
use reportlabel_core::corpus::{class_prevalence, dedup_reports, split_random, Dataset, Provenance};
use reportlabel_core::eval::{compare_models, evaluate_with_ci, per_condition_report, Comparison, EvalReport};
use reportlabel_core::model::{Encoder, EncoderAdapter, MultiHeadClassifier, Vocab, WordPieceTokenizer};
use reportlabel_core::schema::{Condition, LabelClass, LabelVector};
use reportlabel_core::training::{apply_freeze, predict_sequences, train_observed, EvalRecord, Phase, StrategyKind, TrainError, TrainObserver, TrainRun, TrainStrategy};
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, manifest_of, save_checkpoint, CheckpointError};
use crate::config::{
    require, AugmentConfig, BootstrapSection, ClientKind, CompareConfig, ConfigError, EvaluateConfig, LabelConfig, PrevalenceConfig,
    TrainConfig,
};
use crate::csv_io::{load_reports_csv, write_labels, write_reports_csv, CsvError, LoadedCsv};
use crate::parallel::{Parallel, ParallelTranslator};
use crate::translate::{write_batch_input, BatchFileClient, ProcessClient};

/// Exit code 1 for user and configuration errors, 2 for internal ones.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

macro_rules! user_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::User(e.to_string())
            }
        }
    )*};
}

user_error!(ConfigError, CsvError, CheckpointError, reportlabel_core::eval::EvalError, reportlabel_core::augment::AugmentError);

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Shape(s) => CliError::Internal(s.to_string()),
            other => CliError::User(other.to_string()),
        }
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::User(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

pub const RUN_CONFIG_FILE: &str = "config.toml";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BEST_CHECKPOINT_DIR: &str = "checkpoint";
pub const AUTO_CHECKPOINT_DIR: &str = "auto_checkpoint";

/// Streams history records and progress lines.
struct RunLog {
    history: fs::File,
    quiet: bool,
    error: Option<std::io::Error>,
}

impl TrainObserver for RunLog {
    fn on_phase_start(&mut self, phase: Phase, _model: &MultiHeadClassifier) {
        if !self.quiet {
            eprintln!("{phase:?} phase");
        }
    }

    fn on_eval(&mut self, record: &EvalRecord) {
        let line = serde_json::to_string(record).expect("record serializes");
        if let Err(e) = writeln!(self.history, "{line}") {
            self.error.get_or_insert(e);
        }
        if !self.quiet {
            eprintln!(
                "  epoch {:>3} step {:>7} loss {:.4} dev macro F1 {:.4}",
                record.epoch, record.step, record.loss, record.dev_f1_macro
            );
        }
    }
}

#[derive(Debug, Serialize)]
struct PhaseSummary {
    best_dev_f1: f64,
    best_step: u64,
    steps: u64,
    early_stopped: bool,
    evaluations: usize,
}

impl PhaseSummary {
    fn of(run: &TrainRun) -> Self {
        PhaseSummary {
            best_dev_f1: run.best_dev_f1,
            best_step: run.best_step,
            steps: run.steps,
            early_stopped: run.early_stopped,
            evaluations: run.history.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    strategy: StrategyKind,
    final_phase: PhaseSummary,
    auto_phase: Option<PhaseSummary>,
}

pub struct TrainOutcome {
    pub run_dir: PathBuf,
    pub run: TrainRun,
    pub model: MultiHeadClassifier,
}

fn load_data(path: &Path, provenance: Provenance, dedup: bool, fraction: f64, seed: u64) -> Result<Dataset, CliError> {
    let loaded = load_reports_csv(path, provenance)?;
    if !loaded.layout.has_labels() {
        return Err(CliError::User(format!("{}: training data needs label columns", path.display())));
    }
    warn_empty(path, &loaded);
    let mut ds = loaded.dataset;
    if dedup {
        ds = dedup_reports(&ds);
    }
    if ds.split().is_none() {
        ds = split_random(&ds, fraction, seed).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    }
    Ok(ds)
}

fn warn_empty(path: &Path, loaded: &LoadedCsv) {
    if !loaded.empty_reports.is_empty() {
        eprintln!(
            "warning: {}: {} report(s) are empty after normalization and kept: {}",
            path.display(),
            loaded.empty_reports.len(),
            loaded.empty_reports.join(", ")
        );
    }
}

fn fresh_model(cfg: &TrainConfig) -> Result<MultiHeadClassifier, CliError> {
    let enc = &cfg.encoder;
    if let Some(dir) = &enc.checkpoint {
        let loaded = load_checkpoint(dir)?;
        return Ok(MultiHeadClassifier::new(loaded.adapter));
    }
    let vocab_path = require(enc.vocab.as_ref(), "encoder.vocab")?;
    let text = fs::read_to_string(vocab_path).map_err(|e| CliError::User(format!("{}: {e}", vocab_path.display())))?;
    let vocab = Vocab::from_text(&text).map_err(|e| CliError::User(format!("{}: {e}", vocab_path.display())))?;
    let encoder = Encoder::random_with(enc.encoder_config(vocab.len()), enc.init_scheme(), enc.init_seed)
        .map_err(|e| CliError::User(format!("encoder: {e}")))?;
    Ok(MultiHeadClassifier::new(EncoderAdapter::new(
        encoder,
        WordPieceTokenizer::new(vocab, enc.lowercase),
    )))
}

/// Trains per `cfg` and writes the run directory: the resolved config,
/// `history.jsonl`, `summary.json` and the best checkpoint.
pub fn cmd_train(cfg: &TrainConfig, quiet: bool) -> Result<TrainOutcome, CliError> {
    let out = require(cfg.out.clone(), "out")?;
    let s = &cfg.strategy;
    let d = &cfg.data;
    let needs_rad = matches!(s.kind, StrategyKind::Rad | StrategyKind::Hybrid);
    let needs_auto = s.kind == StrategyKind::Auto || (s.kind == StrategyKind::Hybrid && s.init_checkpoint.is_none());
    if needs_rad && s.rad_data.is_none() {
        return Err(ConfigError::Missing("strategy.rad_data").into());
    }
    if needs_auto && s.auto_data.is_none() {
        return Err(ConfigError::Missing("strategy.auto_data").into());
    }
    if s.init_checkpoint.is_some() && s.kind != StrategyKind::Hybrid {
        return Err(CliError::User("strategy.init_checkpoint only applies to strategy hybrid".into()));
    }
    let rad = match (needs_rad, &s.rad_data) {
        (true, Some(p)) => Some(load_data(p, Provenance::Expert, d.dedup, d.rad_train_fraction, d.split_seed)?),
        _ => None,
    };
    let auto = match (needs_auto, &s.auto_data) {
        (true, Some(p)) => Some(load_data(p, Provenance::Automatic, d.dedup, d.auto_train_fraction, d.split_seed)?),
        _ => None,
    };

    // A hybrid run resuming from a checkpoint takes the whole model from it.
    let (mut model, strategy) = match (&s.init_checkpoint, s.kind) {
        (Some(dir), StrategyKind::Hybrid) => {
            let model = load_checkpoint(dir)?;
            let snapshot = model.snapshot();
            let strategy = TrainStrategy::hybrid_from_checkpoint(snapshot, rad.expect("checked"));
            (model, strategy)
        }
        _ => {
            let model = fresh_model(cfg)?;
            let strategy = match s.kind {
                StrategyKind::Rad => TrainStrategy::rad(rad.expect("checked")),
                StrategyKind::Auto => TrainStrategy::auto(auto.expect("checked")),
                StrategyKind::Hybrid => TrainStrategy::hybrid(auto.expect("checked"), rad.expect("checked")),
            };
            (model, strategy)
        }
    };
    apply_freeze(&mut model, s.baseline);

    fs::create_dir_all(&out).map_err(|e| CliError::User(format!("{}: {e}", out.display())))?;
    let resolved = toml::to_string(cfg).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&out.join(RUN_CONFIG_FILE), resolved)?;
    let history_path = out.join(HISTORY_FILE);
    let history = fs::File::create(&history_path).map_err(|e| CliError::User(format!("{}: {e}", history_path.display())))?;
    let mut log = RunLog {
        history,
        quiet,
        error: None,
    };
    let run = train_observed(&mut model, &strategy, &cfg.hyper, &mut log)?;
    if let Some(e) = log.error {
        return Err(CliError::User(format!("{}: {e}", history_path.display())));
    }
    save_checkpoint(&model, &out.join(BEST_CHECKPOINT_DIR))?;
    if let Some(auto) = &run.auto_phase {
        let mut auto_model = model.clone();
        auto_model.restore(&auto.best_checkpoint).map_err(|e| CliError::Internal(e.to_string()))?;
        save_checkpoint(&auto_model, &out.join(AUTO_CHECKPOINT_DIR))?;
    }
    let summary = TrainSummary {
        strategy: s.kind,
        final_phase: PhaseSummary::of(&run),
        auto_phase: run.auto_phase.as_deref().map(PhaseSummary::of),
    };
    write_file(&out.join(SUMMARY_FILE), to_json(&summary)?)?;
    if !quiet {
        eprintln!("best dev macro F1 {:.4} at step {}; run written to {}", run.best_dev_f1, run.best_step, out.display());
    }
    debug_assert_eq!(manifest_of(&model).hidden_size, model.adapter.hidden_size());
    Ok(TrainOutcome { run_dir: out, run, model })
}

/// Labels every row of the reports file, preserving order.
pub fn cmd_label(cfg: &LabelConfig) -> Result<usize, CliError> {
    let ckpt = require(cfg.checkpoint.as_ref(), "checkpoint")?;
    let reports = require(cfg.reports.as_ref(), "reports")?;
    let out = require(cfg.out.as_ref(), "out")?;
    if cfg.batch_size == 0 {
        return Err(CliError::User("batch_size must be at least 1".into()));
    }
    let model = load_checkpoint(ckpt)?;
    let loaded = load_reports_csv(reports, Provenance::Expert)?;
    warn_empty(reports, &loaded);
    let items: Vec<_> = loaded.dataset.items().iter().map(|i| &i.report).collect();
    let seqs: Vec<_> = items.iter().map(|r| model.adapter.tokenize(&r.text)).collect();
    let labels = predict_sequences(&model, &seqs, cfg.batch_size).map_err(|e| CliError::Internal(e.to_string()))?;
    let mut buf = Vec::new();
    write_labels(&items, &labels, &mut buf).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(out, buf)?;
    Ok(items.len())
}

/// Label vectors of `pred` in the order of `gold`'s reports.
fn aligned(gold: &Dataset, pred: &Dataset, pred_path: &Path) -> Result<Vec<LabelVector>, CliError> {
    let by_id: BTreeMap<&str, LabelVector> = pred.items().iter().map(|i| (i.report.report_id.as_str(), i.labels)).collect();
    if pred.len() != gold.len() {
        return Err(CliError::User(format!(
            "{}: {} rows, gold has {}",
            pred_path.display(),
            pred.len(),
            gold.len()
        )));
    }
    gold.items()
        .iter()
        .map(|g| {
            by_id
                .get(g.report.report_id.as_str())
                .copied()
                .ok_or_else(|| CliError::User(format!("{}: no row for report {}", pred_path.display(), g.report.report_id)))
        })
        .collect()
}

fn load_labels(path: &Path) -> Result<Dataset, CliError> {
    let loaded = load_reports_csv(path, Provenance::Expert)?;
    if !loaded.layout.has_labels() {
        return Err(CliError::User(format!("{}: no label columns", path.display())));
    }
    Ok(loaded.dataset)
}

#[derive(Debug, Serialize)]
struct EvaluationOutput<'a> {
    gold: &'a Path,
    pred: &'a Path,
    bootstrap: &'a BootstrapSection,
    evaluation: &'a EvalReport,
}

pub const EVALUATION_FILE: &str = "evaluation.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const TABLE_FILE: &str = "table.csv";

/// Scores `pred` against `gold` with bootstrap intervals; writes
/// `evaluation.json` and `table.csv` under `out` when set.
pub fn cmd_evaluate(cfg: &EvaluateConfig) -> Result<EvalReport, CliError> {
    let gold_path = require(cfg.gold.as_ref(), "gold")?;
    let pred_path = require(cfg.pred.as_ref(), "pred")?;
    let gold = load_labels(gold_path)?;
    let preds = aligned(&gold, &load_labels(pred_path)?, pred_path)?;
    let runner = Parallel::new(cfg.bootstrap.workers);
    let report = evaluate_with_ci(&preds, &gold.labels(), &cfg.bootstrap.eval_config(), &runner)?;
    let table = per_condition_report(&report, None);
    if let Some(out) = &cfg.out {
        let doc = EvaluationOutput {
            gold: gold_path,
            pred: pred_path,
            bootstrap: &cfg.bootstrap,
            evaluation: &report,
        };
        write_file(&out.join(EVALUATION_FILE), to_json(&doc)?)?;
        write_file(&out.join(TABLE_FILE), table.to_csv())?;
    }
    print!("{}", table.render());
    Ok(report)
}

#[derive(Debug, Serialize)]
struct ComparisonOutput<'a> {
    gold: &'a Path,
    pred_a: &'a Path,
    pred_b: &'a Path,
    bootstrap: &'a BootstrapSection,
    comparison: &'a Comparison,
    evaluation_a: &'a EvalReport,
    evaluation_b: &'a EvalReport,
}

/// Paired bootstrap comparison of `pred_a` against `pred_b`.
pub fn cmd_compare(cfg: &CompareConfig) -> Result<Comparison, CliError> {
    let gold_path = require(cfg.gold.as_ref(), "gold")?;
    let a_path = require(cfg.pred_a.as_ref(), "pred_a")?;
    let b_path = require(cfg.pred_b.as_ref(), "pred_b")?;
    let gold_ds = load_labels(gold_path)?;
    let a = aligned(&gold_ds, &load_labels(a_path)?, a_path)?;
    let b = aligned(&gold_ds, &load_labels(b_path)?, b_path)?;
    let gold = gold_ds.labels();
    let runner = Parallel::new(cfg.bootstrap.workers);
    let ec = cfg.bootstrap.eval_config();
    let eval_a = evaluate_with_ci(&a, &gold, &ec, &runner)?;
    let eval_b = evaluate_with_ci(&b, &gold, &ec, &runner)?;
    let cmp = compare_models(&a, &b, &gold, &ec, &runner)?;
    let table = per_condition_report(&eval_a, Some(&cmp));
    if let Some(out) = &cfg.out {
        let doc = ComparisonOutput {
            gold: gold_path,
            pred_a: a_path,
            pred_b: b_path,
            bootstrap: &cfg.bootstrap,
            comparison: &cmp,
            evaluation_a: &eval_a,
            evaluation_b: &eval_b,
        };
        write_file(&out.join(COMPARISON_FILE), to_json(&doc)?)?;
        write_file(&out.join(TABLE_FILE), table.to_csv())?;
    }
    print!("{}", table.render());
    println!(
        "mean difference {:.4} [{:.4}, {:.4}], two-sided p {:.4}",
        cmp.mean_diff, cmp.ci.lo, cmp.ci.hi, cmp.p_value_two_sided
    );
    Ok(cmp)
}

pub const BATCH_INPUT_FILE: &str = "input.txt";
pub const BATCH_OUTPUT_FILE: &str = "output.txt";

pub enum AugmentOutcome {
    /// Rows written: base items plus one copy per selected item.
    Written { rows: usize, fallbacks: usize },
    /// Batch input written; translate it and re-run.
    AwaitingTranslation { input: PathBuf, lines: usize },
}

pub fn cmd_augment(cfg: &AugmentConfig) -> Result<AugmentOutcome, CliError> {
    let input = require(cfg.input.as_ref(), "input")?;
    let out = require(cfg.out.as_ref(), "out")?;
    let loaded = load_reports_csv(input, Provenance::Expert)?;
    if !loaded.layout.has_labels() {
        return Err(CliError::User(format!("{}: augmentation needs label columns", input.display())));
    }
    warn_empty(input, &loaded);
    let mut ds = loaded.dataset;
    if let (Some(fraction), None) = (cfg.train_fraction, ds.split()) {
        ds = split_random(&ds, fraction, cfg.split_seed).map_err(|e| CliError::User(format!("{}: {e}", input.display())))?;
    }
    let opts = AugmentOptions {
        augment_dev: cfg.augment_dev,
    };
    let t = &cfg.translation;
    let tc = TranslationConfig {
        pivot_language: t.pivot_language.clone(),
        beam_size: t.beam_size,
    };
    let client: Box<dyn Backtranslate> = match t.client {
        ClientKind::Identity => Box::new(IdentityStub),
        ClientKind::Dictionary => Box::new(DictionaryStub {
            replacements: t.dictionary.clone(),
        }),
        ClientKind::Process => {
            if t.command.is_empty() {
                return Err(ConfigError::Missing("translation.command").into());
            }
            Box::new(ParallelTranslator::new(ProcessClient::new(t.command.clone(), tc), t.workers))
        }
        ClientKind::BatchFile => {
            let dir = require(t.batch_dir.as_ref(), "translation.batch_dir")?;
            let output = dir.join(BATCH_OUTPUT_FILE);
            if !output.exists() {
                let texts: Vec<&str> = select_items(&ds, &opts).iter().map(|i| i.report.text.as_str()).collect();
                let path = dir.join(BATCH_INPUT_FILE);
                fs::create_dir_all(dir).map_err(|e| CliError::User(format!("{}: {e}", dir.display())))?;
                write_batch_input(&path, &texts).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
                return Ok(AugmentOutcome::AwaitingTranslation {
                    input: path,
                    lines: texts.len(),
                });
            }
            Box::new(BatchFileClient::open(&output).map_err(|e| CliError::User(format!("{}: {e}", output.display())))?)
        }
    };
    let aug = augment_dataset(&ds, client.as_ref(), &opts)?;
    for (id, reason) in &aug.fallbacks {
        eprintln!("warning: {id}: {reason}; original text kept");
    }
    let combined = aug.combined().map_err(|e| CliError::Internal(e.to_string()))?;
    write_reports_csv(&combined, out)?;
    Ok(AugmentOutcome::Written {
        rows: combined.len(),
        fallbacks: aug.fallbacks.len(),
    })
}

/// Long-format class counts: `condition,class,count,fraction`.
pub fn cmd_prevalence(cfg: &PrevalenceConfig) -> Result<String, CliError> {
    let input = require(cfg.input.as_ref(), "input")?;
    let mut ds = load_labels(input)?;
    if cfg.dedup {
        ds = dedup_reports(&ds);
    }
    let table = class_prevalence(&ds);
    let mut csv = String::from("condition,class,count,fraction\n");
    for c in Condition::ALL {
        for k in LabelClass::ALL {
            csv += &format!("{},{},{},{}\n", c.name(), k.name(), table.count(c, k), table.fraction(c, k));
        }
    }
    match &cfg.out {
        Some(out) => write_file(out, &csv)?,
        None => print!("{csv}"),
    }
    Ok(csv)
}
