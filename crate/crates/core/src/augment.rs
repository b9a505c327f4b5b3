//! Backtranslation augmentation behind a pluggable client.
//!
//! Each selected item gets exactly one copy with id `{id}_bt`, the same
//! labels and `Backtranslated` provenance. A failed or empty translation
//! falls back to the original text and is flagged, so the pool always
//! doubles. Only train-side items are augmented unless `augment_dev` is set.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_text, DataError, Dataset, LabeledReport, Provenance, Report, Split};

pub const AUGMENTED_SUFFIX: &str = "_bt";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslationError {
    #[error("translation client failed: {0}")]
    Client(String),
    #[error("translation came back empty")]
    Empty,
    #[error("client returned {got} outputs for {expected} inputs")]
    Count { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationConfig {
    pub pivot_language: String,
    pub beam_size: usize,
}

impl Default for TranslationConfig {
    fn default() -> Self {
        TranslationConfig {
            pivot_language: "de".to_string(),
            beam_size: 1,
        }
    }
}

/// Source → pivot → source. Implementations must be deterministic for a
/// fixed configuration.
pub trait Backtranslate {
    fn backtranslate(&self, text: &str) -> Result<String, TranslationError>;

    /// Results in input order. Override to batch or parallelize.
    fn backtranslate_batch(&self, texts: &[&str]) -> Vec<Result<String, TranslationError>> {
        texts.iter().map(|t| self.backtranslate(t)).collect()
    }
}

/// Returns its input.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityStub;

impl Backtranslate for IdentityStub {
    fn backtranslate(&self, text: &str) -> Result<String, TranslationError> {
        Ok(text.to_string())
    }
}

/// Whole-word substitution, standing in for a paraphrasing round trip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DictionaryStub {
    pub replacements: BTreeMap<String, String>,
}

impl DictionaryStub {
    pub fn new<I, K, V>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        DictionaryStub {
            replacements: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect(),
        }
    }
}

impl Backtranslate for DictionaryStub {
    fn backtranslate(&self, text: &str) -> Result<String, TranslationError> {
        let words: Vec<&str> = text
            .split(' ')
            .map(|w| self.replacements.get(w).map(String::as_str).unwrap_or(w))
            .collect();
        Ok(words.join(" "))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentOptions {
    /// Also augment dev-side items.
    pub augment_dev: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AugmentError {
    #[error("item {id} has {found:?} provenance; only expert items are augmented")]
    Provenance { id: String, found: Provenance },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Translation(TranslationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset {
    pub base: Dataset,
    pub augmented: Dataset,
    /// Augmented id → base id.
    pub pairing: BTreeMap<String, String>,
    /// Augmented ids whose text is a fallback copy, with the reason.
    pub fallbacks: Vec<(String, TranslationError)>,
}

impl AugmentedDataset {
    /// Base train items followed by their copies, in dataset order. An
    /// unsplit base counts as all train.
    pub fn combined_train(&self) -> Vec<&LabeledReport> {
        let mut out: Vec<&LabeledReport> = self
            .base
            .items()
            .iter()
            .filter(|i| self.base.split_of(&i.report.report_id) != Some(Split::Dev))
            .collect();
        let train_copies = self
            .augmented
            .items()
            .iter()
            .filter(|a| self.base.split_of(&self.pairing[&a.report.report_id]) != Some(Split::Dev));
        out.extend(train_copies);
        out
    }

    /// Base plus augmented items as one dataset; each copy inherits the
    /// split of its base item.
    pub fn combined(&self) -> Result<Dataset, DataError> {
        let mut items = self.base.items().to_vec();
        items.extend(self.augmented.items().iter().cloned());
        let ds = Dataset::new(items)?;
        match self.base.split() {
            Some(split) => {
                let mut merged = split.clone();
                for (aug, base) in &self.pairing {
                    merged.insert(aug.clone(), split[base]);
                }
                ds.with_split(merged, self.base.seed())
            }
            None => Ok(ds),
        }
    }
}

/// Items that receive a copy under `opts`.
pub fn select_items<'a>(ds: &'a Dataset, opts: &AugmentOptions) -> Vec<&'a LabeledReport> {
    ds.items()
        .iter()
        .filter(|i| opts.augment_dev || ds.split_of(&i.report.report_id) != Some(Split::Dev))
        .collect()
}

/// Builds the copies from per-item translation results aligned with
/// `select_items(ds, opts)`.
pub fn assemble(
    ds: &Dataset,
    opts: &AugmentOptions,
    translations: Vec<Result<String, TranslationError>>,
) -> Result<AugmentedDataset, AugmentError> {
    let selected = select_items(ds, opts);
    if selected.len() != translations.len() {
        return Err(AugmentError::Translation(TranslationError::Count {
            expected: selected.len(),
            got: translations.len(),
        }));
    }
    let mut items = Vec::with_capacity(selected.len());
    let mut pairing = BTreeMap::new();
    let mut fallbacks = Vec::new();
    for (base, result) in selected.into_iter().zip(translations) {
        if base.provenance != Provenance::Expert {
            return Err(AugmentError::Provenance {
                id: base.report.report_id.clone(),
                found: base.provenance,
            });
        }
        let id = format!("{}{AUGMENTED_SUFFIX}", base.report.report_id);
        let text = match result.map(|t| normalize_text(&t)) {
            Ok(t) if !t.is_empty() => t,
            Ok(_) => {
                fallbacks.push((id.clone(), TranslationError::Empty));
                base.report.text.clone()
            }
            Err(e) => {
                fallbacks.push((id.clone(), e));
                base.report.text.clone()
            }
        };
        pairing.insert(id.clone(), base.report.report_id.clone());
        items.push(LabeledReport {
            report: Report {
                report_id: id,
                patient_id: base.report.patient_id.clone(),
                text,
            },
            labels: base.labels,
            provenance: Provenance::Backtranslated,
        });
    }
    Ok(AugmentedDataset {
        base: ds.clone(),
        augmented: Dataset::new(items)?,
        pairing,
        fallbacks,
    })
}

pub fn augment_dataset<C: Backtranslate + ?Sized>(ds: &Dataset, client: &C, opts: &AugmentOptions) -> Result<AugmentedDataset, AugmentError> {
    let texts: Vec<&str> = select_items(ds, opts).iter().map(|i| i.report.text.as_str()).collect();
    let translations = if texts.is_empty() {
        Vec::new()
    } else {
        client.backtranslate_batch(&texts)
    };
    assemble(ds, opts, translations)
}
