//! Report datasets: text normalization, deduplication, seeded train/dev
//! splitting and class prevalence tables.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::schema::{Condition, LabelClass, LabelVector, NUM_CONDITIONS};

/// Collapse every whitespace run (newlines included) to a single space and
/// trim both ends. Idempotent.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub report_id: String,
    pub patient_id: String,
    pub text: String,
}

impl Report {
    /// Builds a report, normalizing `text`.
    pub fn new(report_id: impl Into<String>, patient_id: impl Into<String>, text: &str) -> Self {
        Report {
            report_id: report_id.into(),
            patient_id: patient_id.into(),
            text: normalize_text(text),
        }
    }
}

/// Where a label vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Expert,
    Automatic,
    Backtranslated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub report: Report,
    pub labels: LabelVector,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("duplicate report_id {0:?}")]
    DuplicateId(String),
    #[error("split assignment missing for report_id {0:?}")]
    SplitMissing(String),
    #[error("split assignment names unknown report_id {0:?}")]
    SplitUnknown(String),
    #[error("train fraction {0} is outside (0, 1)")]
    Fraction(f64),
    #[error("split of {n} items gives {train} train / {dev} dev; both sides must be non-empty")]
    Size { n: usize, train: usize, dev: usize },
}

/// An ordered collection of labeled reports with unique ids and an optional
/// total train/dev assignment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    items: Vec<LabeledReport>,
    split: Option<BTreeMap<String, Split>>,
    seed: u64,
}

impl Dataset {
    pub fn new(items: Vec<LabeledReport>) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.report.report_id.as_str()) {
                return Err(DataError::DuplicateId(item.report.report_id.clone()));
            }
        }
        Ok(Dataset {
            items,
            split: None,
            seed: 0,
        })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    /// Attach an explicit assignment. It must cover exactly the dataset's ids.
    pub fn with_split(mut self, split: BTreeMap<String, Split>, seed: u64) -> Result<Self, DataError> {
        for item in &self.items {
            if !split.contains_key(&item.report.report_id) {
                return Err(DataError::SplitMissing(item.report.report_id.clone()));
            }
        }
        if split.len() != self.items.len() {
            let ids: BTreeSet<&str> = self.items.iter().map(|i| i.report.report_id.as_str()).collect();
            let unknown = split.keys().find(|k| !ids.contains(k.as_str())).cloned().unwrap_or_default();
            return Err(DataError::SplitUnknown(unknown));
        }
        self.split = Some(split);
        self.seed = seed;
        Ok(self)
    }

    pub fn items(&self) -> &[LabeledReport] {
        &self.items
    }

    pub fn into_items(self) -> Vec<LabeledReport> {
        self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn split(&self) -> Option<&BTreeMap<String, Split>> {
        self.split.as_ref()
    }

    pub fn split_of(&self, report_id: &str) -> Option<Split> {
        self.split.as_ref().and_then(|s| s.get(report_id).copied())
    }

    /// Items assigned to `side`, in dataset order. Empty when unsplit.
    pub fn side(&self, side: Split) -> Vec<&LabeledReport> {
        self.items
            .iter()
            .filter(|i| self.split_of(&i.report.report_id) == Some(side))
            .collect()
    }

    pub fn labels(&self) -> Vec<LabelVector> {
        self.items.iter().map(|i| i.labels).collect()
    }
}

/// Keep the first item for each `(patient_id, normalized text)` pair.
pub fn dedup_reports(ds: &Dataset) -> Dataset {
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    let items: Vec<LabeledReport> = ds
        .items
        .iter()
        .filter(|item| {
            let key = (item.report.patient_id.clone(), normalize_text(&item.report.text));
            seen.insert(key)
        })
        .cloned()
        .collect();
    let split = ds.split.as_ref().map(|s| {
        items
            .iter()
            .map(|i| (i.report.report_id.clone(), s[&i.report.report_id]))
            .collect()
    });
    Dataset {
        items,
        split,
        seed: ds.seed,
    }
}

/// `round(fraction * n)` with halves rounded up.
pub fn train_size(n: usize, fraction: f64) -> usize {
    libm::floor(fraction * n as f64 + 0.5) as usize
}

/// Seeded train/dev assignment. The ids are sorted before shuffling so the
/// assignment depends only on the id set, the fraction and the seed.
pub fn split_random(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<Dataset, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::Fraction(train_fraction));
    }
    let n = ds.items.len();
    let n_train = train_size(n, train_fraction);
    if n_train == 0 || n_train >= n {
        return Err(DataError::Size {
            n,
            train: n_train,
            dev: n.saturating_sub(n_train),
        });
    }
    let mut ids: Vec<&str> = ds.items.iter().map(|i| i.report.report_id.as_str()).collect();
    ids.sort_unstable();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let split = ids
        .iter()
        .enumerate()
        .map(|(rank, id)| {
            let side = if rank < n_train { Split::Train } else { Split::Dev };
            (String::from(*id), side)
        })
        .collect();
    Ok(Dataset {
        items: ds.items.clone(),
        split: Some(split),
        seed,
    })
}

/// Per-condition class counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrevalenceTable {
    pub total: usize,
    pub counts: [[usize; 4]; NUM_CONDITIONS],
}

impl PrevalenceTable {
    pub fn count(&self, condition: Condition, class: LabelClass) -> usize {
        self.counts[condition.index()][class.index()]
    }

    /// Share of reports; zero for an empty dataset.
    pub fn fraction(&self, condition: Condition, class: LabelClass) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(condition, class) as f64 / self.total as f64
        }
    }
}

pub fn class_prevalence(ds: &Dataset) -> PrevalenceTable {
    let mut counts = [[0usize; 4]; NUM_CONDITIONS];
    for item in &ds.items {
        for (c, k) in item.labels.iter() {
            counts[c.index()][k.index()] += 1;
        }
    }
    PrevalenceTable {
        total: ds.items.len(),
        counts,
    }
}
