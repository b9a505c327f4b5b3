//! Seeded trigger-token corpus for demos and smoke tests.
//!
//! Every (condition, class) pair except Blank owns one token, for example
//! `edemapos` or `pneumothoraxunc`. A report mentions most findings by their
//! trigger, optionally padded with filler words, so the label vector is a
//! deterministic function of the token set. A share of reports are normal,
//! with every mention negative. No Finding is positive exactly when no other
//! condition is positive or uncertain.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Dataset, LabeledReport, Provenance, Report};
use crate::model::tokenizer::{Vocab, CLS, PAD, SEP, UNK};
use crate::schema::{Condition, LabelClass, LabelVector, NUM_CONDITIONS};

pub const FILLER: [&str; 12] = [
    "the", "chest", "view", "frontal", "lateral", "seen", "again", "study", "compared", "with", "prior", "film",
];

fn slug(condition: Condition) -> String {
    condition.name().chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

/// The token announcing `class` for `condition`; Blank has none, and No
/// Finding only has a positive trigger.
pub fn trigger_token(condition: Condition, class: LabelClass) -> Option<String> {
    let suffix = match class {
        LabelClass::Blank => return None,
        LabelClass::Positive => "pos",
        LabelClass::Negative => "neg",
        LabelClass::Uncertain => "unc",
    };
    condition.allows(class).then(|| format!("{}{suffix}", slug(condition)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n_items: usize,
    /// Inclusive range of conditions mentioned per report.
    pub mentions: (usize, usize),
    /// Inclusive range of filler words per report.
    pub fillers: (usize, usize),
    /// Share of normal reports, whose mentions are all negative.
    pub normal_fraction: f64,
    /// Probability that a mentioned condition's label is redrawn at random,
    /// imitating an automatic labeler's mistakes.
    pub label_noise: f64,
    pub provenance: Provenance,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_items: 32,
            mentions: (8, 12),
            fillers: (0, 0),
            normal_fraction: 0.25,
            label_noise: 0.0,
            provenance: Provenance::Expert,
            seed: 0,
        }
    }
}

/// Items are named `{prefix}{index:04}`; patients are one per report.
pub fn generate(cfg: &SyntheticConfig, id_prefix: &str) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let findings: Vec<Condition> = Condition::ALL.iter().copied().filter(|&c| c != Condition::NoFinding).collect();
    let classes = [LabelClass::Positive, LabelClass::Negative, LabelClass::Uncertain];
    let mut items = Vec::with_capacity(cfg.n_items);
    for i in 0..cfg.n_items {
        let n_mentions = rng.gen_range(cfg.mentions.0..=cfg.mentions.1.min(findings.len()));
        let mut labels = [LabelClass::Blank; NUM_CONDITIONS];
        let mut words: Vec<String> = Vec::new();
        let normal = rng.gen_bool(cfg.normal_fraction);
        for &c in findings.choose_multiple(&mut rng, n_mentions) {
            let k = if normal {
                LabelClass::Negative
            } else {
                *classes.choose(&mut rng).expect("non-empty")
            };
            words.push(trigger_token(c, k).expect("finding classes have triggers"));
            labels[c.index()] = k;
        }
        let no_finding = !labels.iter().any(|&k| matches!(k, LabelClass::Positive | LabelClass::Uncertain));
        if no_finding {
            labels[Condition::NoFinding.index()] = LabelClass::Positive;
            words.push(trigger_token(Condition::NoFinding, LabelClass::Positive).expect("positive trigger"));
        }
        for _ in 0..rng.gen_range(cfg.fillers.0..=cfg.fillers.1) {
            words.push(String::from(*FILLER.choose(&mut rng).expect("non-empty")));
        }
        words.shuffle(&mut rng);
        if cfg.label_noise > 0.0 {
            for &c in &findings {
                if labels[c.index()] != LabelClass::Blank && rng.gen_bool(cfg.label_noise) {
                    labels[c.index()] = LabelClass::ALL[rng.gen_range(0..4)];
                }
            }
        }
        let labels = LabelVector::new(labels).expect("No Finding is Blank or Positive");
        let id = format!("{id_prefix}{i:04}");
        items.push(LabeledReport {
            report: Report::new(id.clone(), id, &words.join(" ")),
            labels,
            provenance: cfg.provenance,
        });
    }
    Dataset::new(items).expect("generated ids are unique")
}

/// Specials, every trigger and the filler words.
pub fn vocab() -> Vocab {
    let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| String::from(*s)).collect();
    for c in Condition::ALL {
        for k in LabelClass::ALL {
            tokens.extend(trigger_token(c, k));
        }
    }
    tokens.extend(FILLER.iter().map(|s| String::from(*s)));
    Vocab::from_tokens(tokens).expect("specials present")
}
