//! Self-describing checkpoint directories.
//!
//! ```text
//! manifest.json   schema version, encoder config, head input mode,
//!                 condition order and the tensor table
//! encoder.bin     encoder tensors, little-endian f32, manifest order
//! heads.bin       head tensors, same encoding
//! vocab.txt       one token per line, line number = id
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use reportlabel_core::model::{
    EncoderAdapter, EncoderConfig, HeadInputMode, ModelSnapshot, MultiHeadClassifier, Vocab, WordPieceTokenizer,
};
use reportlabel_core::model::Encoder;
use reportlabel_core::schema::Condition;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENCODER_FILE: &str = "encoder.bin";
pub const HEADS_FILE: &str = "heads.bin";
pub const VOCAB_FILE: &str = "vocab.txt";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub encoder: EncoderConfig,
    pub lowercase: bool,
    pub head_input_mode: HeadInputMode,
    pub hidden_size: usize,
    pub conditions: Vec<String>,
    pub encoder_tensors: Vec<TensorEntry>,
    pub head_tensors: Vec<TensorEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn encode(tensors: &[(String, Vec<f32>)]) -> Vec<u8> {
    tensors.iter().flat_map(|(_, v)| v.iter().flat_map(|x| x.to_le_bytes())).collect()
}

fn entries(tensors: &[(String, Vec<f32>)]) -> Vec<TensorEntry> {
    tensors
        .iter()
        .map(|(name, v)| TensorEntry {
            name: name.clone(),
            len: v.len(),
        })
        .collect()
}

pub fn manifest_of(model: &MultiHeadClassifier) -> Manifest {
    let snap = model.snapshot();
    Manifest {
        schema_version: SCHEMA_VERSION,
        encoder: model.encoder().config().clone(),
        lowercase: model.adapter.tokenizer.lowercase(),
        head_input_mode: model.head_input_mode,
        hidden_size: model.adapter.hidden_size(),
        conditions: Condition::ALL.iter().map(|c| c.name().to_string()).collect(),
        encoder_tensors: entries(&snap.encoder()),
        head_tensors: entries(&snap.heads()),
    }
}

/// Writes the model's current weights, creating `dir` if needed.
pub fn save_checkpoint(model: &MultiHeadClassifier, dir: &Path) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let snap = model.snapshot();
    let manifest = serde_json::to_string_pretty(&manifest_of(model)).expect("manifest serializes");
    let files: [(&str, Vec<u8>); 4] = [
        (MANIFEST_FILE, (manifest + "\n").into_bytes()),
        (ENCODER_FILE, encode(&snap.encoder())),
        (HEADS_FILE, encode(&snap.heads())),
        (VOCAB_FILE, model.adapter.tokenizer.vocab().to_text().into_bytes()),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
    }
    Ok(())
}

fn decode(path: &Path, bytes: &[u8], table: &[TensorEntry]) -> Result<Vec<(String, Vec<f32>)>, CheckpointError> {
    let expected: usize = table.iter().map(|t| t.len * 4).sum();
    if bytes.len() != expected {
        return Err(CheckpointError::Manifest {
            path: path.to_path_buf(),
            message: format!("{} bytes, manifest describes {expected}", bytes.len()),
        });
    }
    let mut floats = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]));
    Ok(table
        .iter()
        .map(|t| (t.name.clone(), floats.by_ref().take(t.len).collect()))
        .collect())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CheckpointError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CheckpointError::Manifest {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let bad = |message: String| CheckpointError::Manifest {
        path: path.clone(),
        message,
    };
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(bad(format!(
            "schema version {} is not supported (expected {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    let canonical: Vec<&str> = Condition::ALL.iter().map(|c| c.name()).collect();
    if manifest.conditions != canonical {
        return Err(bad(format!("condition order {:?} differs from the canonical order", manifest.conditions)));
    }
    if manifest.hidden_size != manifest.encoder.hidden_size {
        return Err(bad(format!(
            "hidden_size {} disagrees with the encoder's {}",
            manifest.hidden_size, manifest.encoder.hidden_size
        )));
    }
    Ok(manifest)
}

/// Rebuilds the classifier saved in `dir`. Freezing is a training choice
/// and is not stored.
pub fn load_checkpoint(dir: &Path) -> Result<MultiHeadClassifier, CheckpointError> {
    let manifest = read_manifest(dir)?;
    let bad = |path: &Path, message: String| CheckpointError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let vocab_path = dir.join(VOCAB_FILE);
    let vocab_text = fs::read_to_string(&vocab_path).map_err(io_err(&vocab_path))?;
    let vocab = Vocab::from_text(&vocab_text).map_err(|e| bad(&vocab_path, e.to_string()))?;
    if vocab.len() != manifest.encoder.vocab_size {
        return Err(bad(
            &vocab_path,
            format!("{} tokens, encoder expects {}", vocab.len(), manifest.encoder.vocab_size),
        ));
    }
    let encoder = Encoder::random(manifest.encoder.clone(), 0.0, 0).map_err(|e| bad(&dir.join(MANIFEST_FILE), e.to_string()))?;
    let adapter = EncoderAdapter::new(encoder, WordPieceTokenizer::new(vocab, manifest.lowercase));
    let mut model = MultiHeadClassifier::new(adapter);
    model.head_input_mode = manifest.head_input_mode;
    let mut params = Vec::new();
    for (file, table) in [(ENCODER_FILE, &manifest.encoder_tensors), (HEADS_FILE, &manifest.head_tensors)] {
        let path = dir.join(file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        params.extend(decode(&path, &bytes, table)?);
    }
    model
        .restore(&ModelSnapshot { params })
        .map_err(|e| bad(&dir.join(MANIFEST_FILE), e.to_string()))?;
    Ok(model)
}
