//! Rad, auto and hybrid supervision with dev-set checkpoint selection.
//!
//! A phase finetunes every trainable parameter with Adam on the train side
//! of one dataset. The dev side is scored (macro weighted-F1) every
//! `eval_every` steps and at each epoch end; the best-scoring weights are
//! snapshotted and restored into the model when the phase ends. Hybrid runs
//! an auto phase (or loads its checkpoint), then a rad phase with fresh
//! optimizer state selected on the rad dev split.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, LabeledReport, Provenance, Split};
use crate::eval::evaluate;
use crate::model::tokenizer::TokenSequence;
use crate::model::{FreezeMode, HeadInputMode, ModelSnapshot, MultiHeadClassifier, ShapeError, TokenBatch};
use crate::optim::Adam;
use crate::schema::{LabelVector, NUM_CONDITIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epoch budget of a rad phase.
    pub max_epochs: usize,
    /// Epoch budget of an auto phase.
    pub auto_max_epochs: usize,
    /// Extra evaluation every this many steps, on top of epoch ends.
    /// Serialized as 0 when off.
    #[serde(with = "zero_is_none")]
    pub eval_every: Option<usize>,
    /// Stop a rad phase after this many evaluations without improvement.
    /// Serialized as 0 when off.
    #[serde(with = "zero_is_none")]
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            learning_rate: 2e-5,
            batch_size: 18,
            max_epochs: 20,
            auto_max_epochs: 8,
            eval_every: Some(500),
            patience: Some(5),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("strategy {0:?} requires rad_data")]
    MissingRadData(StrategyKind),
    #[error("strategy {0:?} requires auto_data")]
    MissingAutoData(StrategyKind),
    #[error("{field} holds a {found:?} item ({id})")]
    Provenance {
        field: &'static str,
        found: Provenance,
        id: alloc::string::String,
    },
    #[error("learning_rate must be positive and finite, got {0}")]
    LearningRate(f64),
    #[error("{0} must be at least 1")]
    Zero(&'static str),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("{phase:?} dataset has no train/dev assignment")]
    NoSplit { phase: Phase },
    #[error("{phase:?} dataset has an empty {split:?} split")]
    EmptySplit { phase: Phase, split: Split },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

mod zero_is_none {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(v.unwrap_or(0) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        Ok(Some(usize::deserialize(d)?).filter(|&n| n > 0))
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ConfigError::LearningRate(self.learning_rate));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("auto_max_epochs", self.auto_max_epochs),
            ("eval_every", self.eval_every.unwrap_or(1)),
            ("patience", self.patience.unwrap_or(1)),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Rad,
    Auto,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Auto,
    Rad,
}

#[derive(Debug, Clone)]
pub struct TrainStrategy {
    pub kind: StrategyKind,
    pub rad_data: Option<Dataset>,
    pub auto_data: Option<Dataset>,
    /// Replaces the auto phase of a hybrid run.
    pub init_checkpoint: Option<ModelSnapshot>,
}

impl TrainStrategy {
    pub fn rad(data: Dataset) -> Self {
        TrainStrategy {
            kind: StrategyKind::Rad,
            rad_data: Some(data),
            auto_data: None,
            init_checkpoint: None,
        }
    }

    pub fn auto(data: Dataset) -> Self {
        TrainStrategy {
            kind: StrategyKind::Auto,
            rad_data: None,
            auto_data: Some(data),
            init_checkpoint: None,
        }
    }

    pub fn hybrid(auto_data: Dataset, rad_data: Dataset) -> Self {
        TrainStrategy {
            kind: StrategyKind::Hybrid,
            rad_data: Some(rad_data),
            auto_data: Some(auto_data),
            init_checkpoint: None,
        }
    }

    pub fn hybrid_from_checkpoint(checkpoint: ModelSnapshot, rad_data: Dataset) -> Self {
        TrainStrategy {
            kind: StrategyKind::Hybrid,
            rad_data: Some(rad_data),
            auto_data: None,
            init_checkpoint: Some(checkpoint),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let needs_rad = matches!(self.kind, StrategyKind::Rad | StrategyKind::Hybrid);
        let needs_auto = match self.kind {
            StrategyKind::Auto => true,
            StrategyKind::Hybrid => self.init_checkpoint.is_none(),
            StrategyKind::Rad => false,
        };
        if needs_rad && self.rad_data.is_none() {
            return Err(ConfigError::MissingRadData(self.kind));
        }
        if needs_auto && self.auto_data.is_none() {
            return Err(ConfigError::MissingAutoData(self.kind));
        }
        // Backtranslated copies of expert items are expert supervision too.
        if let Some(ds) = self.rad_data.as_ref().filter(|_| needs_rad) {
            check_provenance(ds, "rad_data", |p| p != Provenance::Automatic)?;
        }
        if let Some(ds) = self.auto_data.as_ref().filter(|_| needs_auto) {
            check_provenance(ds, "auto_data", |p| p == Provenance::Automatic)?;
        }
        Ok(())
    }
}

fn check_provenance(ds: &Dataset, field: &'static str, ok: impl Fn(Provenance) -> bool) -> Result<(), ConfigError> {
    match ds.items().iter().find(|i| !ok(i.provenance)) {
        Some(bad) => Err(ConfigError::Provenance {
            field,
            found: bad.provenance,
            id: bad.report.report_id.clone(),
        }),
        None => Ok(()),
    }
}

/// Frozen-encoder baselines reading the CLS state or the token average, and
/// full finetuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    TCls,
    TToken,
    Full,
}

pub fn apply_freeze(model: &mut MultiHeadClassifier, baseline: Baseline) {
    match baseline {
        Baseline::TCls => {
            model.freeze_mode = FreezeMode::EncoderFrozen;
            model.head_input_mode = HeadInputMode::Cls;
        }
        Baseline::TToken => {
            model.freeze_mode = FreezeMode::EncoderFrozen;
            model.head_input_mode = HeadInputMode::TokenAverage;
        }
        Baseline::Full => {}
    }
}

/// One dev evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub phase: Phase,
    pub epoch: usize,
    pub step: u64,
    /// Mean training loss over the steps since the previous record.
    pub loss: f64,
    /// Macro weighted-F1 on the dev split; 0 when no condition is defined.
    pub dev_f1_macro: f64,
    pub per_condition: [Option<f64>; NUM_CONDITIONS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub history: Vec<EvalRecord>,
    pub best_checkpoint: ModelSnapshot,
    pub best_dev_f1: f64,
    pub best_step: u64,
    pub steps: u64,
    pub early_stopped: bool,
    /// The auto phase of a hybrid run that trained one.
    pub auto_phase: Option<Box<TrainRun>>,
}

/// Progress hooks. All methods default to no-ops.
pub trait TrainObserver {
    /// Called before the first step of a phase, after any weights were
    /// loaded.
    fn on_phase_start(&mut self, _phase: Phase, _model: &MultiHeadClassifier) {}
    fn on_step(&mut self, _phase: Phase, _step: u64, _loss: f64) {}
    fn on_eval(&mut self, _record: &EvalRecord) {}
}

pub struct NoObserver;

impl TrainObserver for NoObserver {}

/// Runs `strategy` and leaves `model` holding the best checkpoint.
pub fn train(model: &mut MultiHeadClassifier, strategy: &TrainStrategy, hp: &HyperParams) -> Result<TrainRun, TrainError> {
    train_observed(model, strategy, hp, &mut NoObserver)
}

pub fn train_observed(
    model: &mut MultiHeadClassifier,
    strategy: &TrainStrategy,
    hp: &HyperParams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainRun, TrainError> {
    hp.validate()?;
    strategy.validate()?;
    let rad = strategy.rad_data.as_ref();
    match strategy.kind {
        StrategyKind::Rad => run_phase(model, rad.expect("validated"), Phase::Rad, hp, observer),
        StrategyKind::Auto => run_phase(model, strategy.auto_data.as_ref().expect("validated"), Phase::Auto, hp, observer),
        StrategyKind::Hybrid => {
            // Check the rad data before spending time on the auto phase.
            prepare_split(rad.expect("validated"), Phase::Rad)?;
            let auto_run = match &strategy.init_checkpoint {
                Some(ckpt) => {
                    model.restore(ckpt)?;
                    None
                }
                None => {
                    let auto = strategy.auto_data.as_ref().expect("validated");
                    Some(Box::new(run_phase(model, auto, Phase::Auto, hp, observer)?))
                }
            };
            let mut run = run_phase(model, rad.expect("validated"), Phase::Rad, hp, observer)?;
            run.auto_phase = auto_run;
            Ok(run)
        }
    }
}

fn prepare_split(ds: &Dataset, phase: Phase) -> Result<(Vec<&LabeledReport>, Vec<&LabeledReport>), DataError> {
    if ds.split().is_none() {
        return Err(DataError::NoSplit { phase });
    }
    let train = ds.side(Split::Train);
    let dev = ds.side(Split::Dev);
    for (side, items) in [(Split::Train, &train), (Split::Dev, &dev)] {
        if items.is_empty() {
            return Err(DataError::EmptySplit { phase, split: side });
        }
    }
    Ok((train, dev))
}

fn phase_seed(seed: u64, phase: Phase) -> u64 {
    match phase {
        Phase::Auto => seed,
        Phase::Rad => seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

/// Dev predictions in batches of `batch_size`.
pub fn predict_sequences(model: &MultiHeadClassifier, seqs: &[TokenSequence], batch_size: usize) -> Result<Vec<LabelVector>, ShapeError> {
    let pad = model.adapter.tokenizer.pad_id();
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(batch_size.max(1)) {
        let refs: Vec<&TokenSequence> = chunk.iter().collect();
        out.extend(model.predict(&TokenBatch::from_sequences(&refs, pad))?);
    }
    Ok(out)
}

struct DevSet {
    seqs: Vec<TokenSequence>,
    gold: Vec<LabelVector>,
}

impl DevSet {
    fn score(&self, model: &MultiHeadClassifier, batch_size: usize) -> Result<(f64, [Option<f64>; NUM_CONDITIONS]), ShapeError> {
        let preds = predict_sequences(model, &self.seqs, batch_size)?;
        Ok(match evaluate(&preds, &self.gold) {
            Ok(report) => {
                let mut per = [None; NUM_CONDITIONS];
                for s in &report.per_condition {
                    per[s.condition.index()] = s.weighted_f1;
                }
                (report.macro_f1, per)
            }
            Err(_) => (0.0, [None; NUM_CONDITIONS]),
        })
    }
}

fn run_phase(
    model: &mut MultiHeadClassifier,
    ds: &Dataset,
    phase: Phase,
    hp: &HyperParams,
    observer: &mut dyn TrainObserver,
) -> Result<TrainRun, TrainError> {
    let (train_items, dev_items) = prepare_split(ds, phase)?;
    let (max_epochs, patience) = match phase {
        Phase::Rad => (hp.max_epochs, hp.patience),
        Phase::Auto => (hp.auto_max_epochs, None),
    };
    let tokenize = |items: &[&LabeledReport]| -> Vec<TokenSequence> { items.iter().map(|i| model.adapter.tokenize(&i.report.text)).collect() };
    let train_seqs = tokenize(&train_items);
    let train_gold: Vec<LabelVector> = train_items.iter().map(|i| i.labels).collect();
    let dev = DevSet {
        seqs: tokenize(&dev_items),
        gold: dev_items.iter().map(|i| i.labels).collect(),
    };
    let pad = model.adapter.tokenizer.pad_id();

    observer.on_phase_start(phase, model);
    let mut adam = Adam::new(hp.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(phase_seed(hp.seed, phase));
    let mut order: Vec<usize> = (0..train_seqs.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, u64, ModelSnapshot)> = None;
    let mut stale = 0usize;
    let mut step = 0u64;
    let mut loss_sum = 0.0;
    let mut loss_steps = 0usize;
    let mut early_stopped = false;

    'epochs: for epoch in 1..=max_epochs {
        order.shuffle(&mut rng);
        let n_chunks = order.len().div_ceil(hp.batch_size);
        for (c, chunk) in order.chunks(hp.batch_size).enumerate() {
            let seqs: Vec<&TokenSequence> = chunk.iter().map(|&i| &train_seqs[i]).collect();
            let gold: Vec<LabelVector> = chunk.iter().map(|&i| train_gold[i]).collect();
            model.zero_grad();
            let loss = model.accumulate_gradients(&TokenBatch::from_sequences(&seqs, pad), &gold)?;
            adam.step(&mut model.trainable_params_mut());
            step += 1;
            loss_sum += loss;
            loss_steps += 1;
            observer.on_step(phase, step, loss);

            let periodic = hp.eval_every.is_some_and(|k| step % k as u64 == 0);
            let epoch_end = c + 1 == n_chunks;
            if periodic || epoch_end {
                let (f1, per_condition) = dev.score(model, hp.batch_size)?;
                let record = EvalRecord {
                    phase,
                    epoch,
                    step,
                    loss: loss_sum / loss_steps as f64,
                    dev_f1_macro: f1,
                    per_condition,
                };
                loss_sum = 0.0;
                loss_steps = 0;
                observer.on_eval(&record);
                history.push(record);
                if best.as_ref().map_or(true, |(b, _, _)| f1 > *b) {
                    best = Some((f1, step, model.snapshot()));
                    stale = 0;
                } else {
                    stale += 1;
                    if patience.is_some_and(|p| stale >= p) {
                        early_stopped = true;
                        break 'epochs;
                    }
                }
            }
        }
    }

    let (best_dev_f1, best_step, best_checkpoint) = best.expect("max_epochs ≥ 1 and train split non-empty");
    model.restore(&best_checkpoint)?;
    Ok(TrainRun {
        history,
        best_checkpoint,
        best_dev_f1,
        best_step,
        steps: step,
        early_stopped,
        auto_phase: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split_random;
    use crate::model::encoder::{Encoder, EncoderConfig};
    use crate::model::tokenizer::WordPieceTokenizer;
    use crate::model::EncoderAdapter;
    use crate::synthetic::{generate, vocab, SyntheticConfig};

    fn tiny_model(seed: u64) -> MultiHeadClassifier {
        let v = vocab();
        let mut cfg = EncoderConfig::tiny("unit", v.len());
        cfg.hidden_size = 16;
        cfg.num_heads = 2;
        cfg.intermediate_size = 32;
        cfg.max_tokens = 16;
        let enc = Encoder::random(cfg, 0.2, seed).unwrap();
        MultiHeadClassifier::new(EncoderAdapter::new(enc, WordPieceTokenizer::new(v, true)))
    }

    fn data(n: usize, provenance: Provenance, seed: u64) -> Dataset {
        let ds = generate(&SyntheticConfig { n_items: n, provenance, seed, ..Default::default() }, "r");
        split_random(&ds, 0.75, seed).unwrap()
    }

    fn quick() -> HyperParams {
        HyperParams { max_epochs: 2, auto_max_epochs: 1, learning_rate: 1e-3, batch_size: 4, ..Default::default() }
    }

    #[test]
    fn strategy_consistency() {
        let d = data(8, Provenance::Expert, 1);
        let missing = TrainStrategy { kind: StrategyKind::Rad, rad_data: None, auto_data: Some(d.clone()), init_checkpoint: None };
        assert_eq!(missing.validate(), Err(ConfigError::MissingRadData(StrategyKind::Rad)));
        let hybrid = TrainStrategy { kind: StrategyKind::Hybrid, rad_data: Some(d.clone()), auto_data: None, init_checkpoint: None };
        assert_eq!(hybrid.validate(), Err(ConfigError::MissingAutoData(StrategyKind::Hybrid)));
        assert!(matches!(TrainStrategy::auto(d.clone()).validate(), Err(ConfigError::Provenance { .. })));
        assert!(TrainStrategy::rad(d).validate().is_ok());
        let bad = HyperParams { batch_size: 0, ..Default::default() };
        assert_eq!(bad.validate(), Err(ConfigError::Zero("batch_size")));
    }

    #[test]
    fn empty_or_missing_split_is_data_error() {
        let mut m = tiny_model(1);
        let unsplit = generate(&SyntheticConfig { n_items: 4, ..Default::default() }, "r");
        let err = train(&mut m, &TrainStrategy::rad(unsplit), &quick()).unwrap_err();
        assert_eq!(err, TrainError::Data(DataError::NoSplit { phase: Phase::Rad }));
    }

    #[test]
    fn best_checkpoint_matches_history_maximum() {
        let mut m = tiny_model(2);
        let run = train(&mut m, &TrainStrategy::rad(data(16, Provenance::Expert, 2)), &quick()).unwrap();
        assert!(!run.history.is_empty());
        let max = run.history.iter().map(|r| r.dev_f1_macro).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best_dev_f1, max);
        assert_eq!(m.snapshot(), run.best_checkpoint);
    }

    #[test]
    fn freeze_baselines() {
        let mut m = tiny_model(3);
        apply_freeze(&mut m, Baseline::Full);
        assert_eq!((m.freeze_mode, m.head_input_mode), (FreezeMode::None, HeadInputMode::Cls));
        apply_freeze(&mut m, Baseline::TToken);
        assert_eq!((m.freeze_mode, m.head_input_mode), (FreezeMode::EncoderFrozen, HeadInputMode::TokenAverage));
        apply_freeze(&mut m, Baseline::TCls);
        assert_eq!((m.freeze_mode, m.head_input_mode), (FreezeMode::EncoderFrozen, HeadInputMode::Cls));
    }

    #[test]
    fn loss_falls_on_a_fixed_batch() {
        let mut m = tiny_model(6);
        let ds = generate(&SyntheticConfig { n_items: 6, seed: 6, ..Default::default() }, "l");
        let seqs: Vec<TokenSequence> = ds.items().iter().map(|i| m.adapter.tokenize(&i.report.text)).collect();
        let batch = TokenBatch::from_sequences(&seqs.iter().collect::<Vec<_>>(), m.adapter.tokenizer.pad_id());
        let gold = ds.labels();
        let mut adam = Adam::new(1e-3);
        let mut losses = Vec::new();
        for _ in 0..6 {
            m.zero_grad();
            losses.push(m.accumulate_gradients(&batch, &gold).unwrap());
            adam.step(&mut m.trainable_params_mut());
        }
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn hybrid_from_checkpoint_skips_auto_phase() {
        let donor = tiny_model(4);
        let mut m = tiny_model(5);
        struct Phases(Vec<Phase>, Option<ModelSnapshot>);
        impl TrainObserver for Phases {
            fn on_phase_start(&mut self, phase: Phase, model: &MultiHeadClassifier) {
                self.0.push(phase);
                self.1 = Some(model.snapshot());
            }
        }
        let mut obs = Phases(Vec::new(), None);
        let strategy = TrainStrategy::hybrid_from_checkpoint(donor.snapshot(), data(12, Provenance::Expert, 4));
        let run = train_observed(&mut m, &strategy, &quick(), &mut obs).unwrap();
        assert_eq!(obs.0, [Phase::Rad]);
        assert_eq!(obs.1.unwrap(), donor.snapshot());
        assert!(run.auto_phase.is_none());
    }
}
