//! TOML run configuration with `key.path=value` overrides.
//!
//! A command's configuration is the file's table, then every override in
//! order, then deserialization into the command's struct. Unknown keys are
//! errors at every level. Relative paths are resolved against the config
//! file's directory, or the working directory without a file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use reportlabel_core::eval::EvalConfig;
use reportlabel_core::model::{EncoderConfig, InitScheme};
use reportlabel_core::training::{Baseline, HyperParams, StrategyKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("override {0:?} is not of the form key=value")]
    Override(String),
    #[error("override {key:?}: {segment:?} is not a table")]
    NotATable { key: String, segment: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("missing required setting {0:?}")]
    Missing(&'static str),
}

/// An override value: TOML syntax when it parses, a bare string otherwise.
fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("single key"),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn set_key(table: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut segments: Vec<&str> = key.split('.').collect();
    let last = segments.pop().expect("split yields one segment");
    let mut cur = table;
    for seg in segments {
        let entry = cur.entry(seg.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(ConfigError::NotATable {
                    key: key.to_string(),
                    segment: seg.to_string(),
                })
            }
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    set_key(table, key.trim(), parse_value(raw.trim()))
}

/// Raw settings before typing: file contents plus overrides.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub table: Table,
    /// Base for relative paths.
    pub base_dir: PathBuf,
}

impl RawConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let cwd = std::env::current_dir().map_err(|source| ConfigError::Io {
            path: PathBuf::from("."),
            source,
        })?;
        let (table, base_dir) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                let table = text.parse::<Table>().map_err(|e| ConfigError::Parse {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?;
                let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
                (table, cwd.join(dir))
            }
            None => (Table::new(), cwd),
        };
        let mut raw = RawConfig { table, base_dir };
        for o in overrides {
            apply_override(&mut raw.table, o)?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> Result<(), ConfigError> {
        set_key(&mut self.table, key, value.into())
    }

    /// Sets a path given on the command line, relative to the working
    /// directory.
    pub fn set_path(&mut self, key: &str, path: &Path) -> Result<(), ConfigError> {
        let abs = std::env::current_dir().map(|d| d.join(path)).unwrap_or_else(|_| path.to_path_buf());
        self.set(key, abs.to_string_lossy().into_owned())
    }

    pub fn parse<T: DeserializeOwned + ResolvePaths>(&self) -> Result<T, ConfigError> {
        let mut value: T = Value::Table(self.table.clone())
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Invalid(e.message().to_string()))?;
        value.resolve_paths(&self.base_dir);
        Ok(value)
    }
}

pub trait ResolvePaths {
    fn resolve_paths(&mut self, base: &Path);
}

/// Joins onto `base` and drops `.` and `..` components lexically.
fn resolve(p: &mut PathBuf, base: &Path) {
    use std::path::Component;
    let joined = base.join(&*p);
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir if matches!(out.components().next_back(), Some(Component::Normal(_))) => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    *p = out;
}

fn resolve_opt(p: &mut Option<PathBuf>, base: &Path) {
    if let Some(p) = p {
        resolve(p, base);
    }
}

pub fn require<T>(v: Option<T>, name: &'static str) -> Result<T, ConfigError> {
    v.ok_or(ConfigError::Missing(name))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub kind: StrategyKind,
    pub rad_data: Option<PathBuf>,
    pub auto_data: Option<PathBuf>,
    /// Checkpoint directory replacing the auto phase of a hybrid run.
    pub init_checkpoint: Option<PathBuf>,
    #[serde(default = "full")]
    pub baseline: Baseline,
}

fn full() -> Baseline {
    Baseline::Full
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Train share of expert data without a stored split.
    pub rad_train_fraction: f64,
    /// Train share of automatic data without a stored split.
    pub auto_train_fraction: f64,
    pub split_seed: u64,
    pub dedup: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            rad_train_fraction: 0.75,
            auto_train_fraction: 0.85,
            split_seed: 0,
            dedup: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Tiny,
    BertBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    /// Take encoder weights and vocabulary from this checkpoint directory.
    pub checkpoint: Option<PathBuf>,
    /// Vocabulary of a fresh encoder, one token per line.
    pub vocab: Option<PathBuf>,
    pub preset: Preset,
    pub name: String,
    pub num_layers: Option<usize>,
    pub hidden_size: Option<usize>,
    pub num_heads: Option<usize>,
    pub intermediate_size: Option<usize>,
    pub max_tokens: Option<usize>,
    pub lowercase: bool,
    pub init_std: f64,
    /// Defaults to `init_std`.
    pub position_std: Option<f64>,
    pub init_seed: u64,
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            checkpoint: None,
            vocab: None,
            preset: Preset::Tiny,
            name: "tiny".to_string(),
            num_layers: None,
            hidden_size: None,
            num_heads: None,
            intermediate_size: None,
            max_tokens: None,
            lowercase: true,
            init_std: 0.02,
            position_std: None,
            init_seed: 0,
        }
    }
}

impl EncoderSection {
    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        let mut cfg = match self.preset {
            Preset::Tiny => EncoderConfig::tiny(self.name.clone(), vocab_size),
            Preset::BertBase => EncoderConfig::bert_base(self.name.clone(), vocab_size),
        };
        let set = |field: &mut usize, v: Option<usize>| *field = v.unwrap_or(*field);
        set(&mut cfg.num_layers, self.num_layers);
        set(&mut cfg.hidden_size, self.hidden_size);
        set(&mut cfg.num_heads, self.num_heads);
        set(&mut cfg.intermediate_size, self.intermediate_size);
        set(&mut cfg.max_tokens, self.max_tokens);
        cfg
    }

    pub fn init_scheme(&self) -> InitScheme {
        InitScheme {
            std: self.init_std as f32,
            position_std: self.position_std.unwrap_or(self.init_std) as f32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub strategy: StrategySection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub hyper: HyperParams,
    /// Run directory.
    pub out: Option<PathBuf>,
}

impl ResolvePaths for TrainConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.strategy.rad_data, base);
        resolve_opt(&mut self.strategy.auto_data, base);
        resolve_opt(&mut self.strategy.init_checkpoint, base);
        resolve_opt(&mut self.encoder.checkpoint, base);
        resolve_opt(&mut self.encoder.vocab, base);
        resolve_opt(&mut self.out, base);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelConfig {
    pub checkpoint: Option<PathBuf>,
    pub reports: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
}

fn default_batch() -> usize {
    32
}

impl ResolvePaths for LabelConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.checkpoint, base);
        resolve_opt(&mut self.reports, base);
        resolve_opt(&mut self.out, base);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub n_bootstrap: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Worker threads; unset uses every core.
    pub workers: Option<usize>,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        let d = EvalConfig::default();
        BootstrapSection {
            n_bootstrap: d.n_bootstrap,
            alpha: d.alpha,
            seed: d.seed,
            workers: None,
        }
    }
}

impl BootstrapSection {
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            n_bootstrap: self.n_bootstrap,
            alpha: self.alpha,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    pub gold: Option<PathBuf>,
    pub pred: Option<PathBuf>,
    /// Output directory.
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
}

impl ResolvePaths for EvaluateConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.gold, base);
        resolve_opt(&mut self.pred, base);
        resolve_opt(&mut self.out, base);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub gold: Option<PathBuf>,
    /// Candidate predictions; differences are a minus b.
    pub pred_a: Option<PathBuf>,
    /// Baseline predictions.
    pub pred_b: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
}

impl ResolvePaths for CompareConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.gold, base);
        resolve_opt(&mut self.pred_a, base);
        resolve_opt(&mut self.pred_b, base);
        resolve_opt(&mut self.out, base);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    Identity,
    Dictionary,
    Process,
    BatchFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslationSection {
    pub client: ClientKind,
    pub pivot_language: String,
    pub beam_size: usize,
    pub workers: usize,
    /// Program and arguments for the process client.
    pub command: Vec<String>,
    /// Word replacements for the dictionary client.
    pub dictionary: BTreeMap<String, String>,
    /// Directory holding `input.txt` and, once translated, `output.txt`.
    pub batch_dir: Option<PathBuf>,
}

impl Default for TranslationSection {
    fn default() -> Self {
        TranslationSection {
            client: ClientKind::Identity,
            pivot_language: "de".to_string(),
            beam_size: 1,
            workers: crate::parallel::DEFAULT_TRANSLATION_WORKERS,
            command: Vec::new(),
            dictionary: BTreeMap::new(),
            batch_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub augment_dev: bool,
    /// Split unsplit input first, so dev items can be left alone.
    pub train_fraction: Option<f64>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub translation: TranslationSection,
}

impl ResolvePaths for AugmentConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.input, base);
        resolve_opt(&mut self.out, base);
        resolve_opt(&mut self.translation.batch_dir, base);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrevalenceConfig {
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub dedup: bool,
    pub out: Option<PathBuf>,
}

impl ResolvePaths for PrevalenceConfig {
    fn resolve_paths(&mut self, base: &Path) {
        resolve_opt(&mut self.input, base);
        resolve_opt(&mut self.out, base);
    }
}
