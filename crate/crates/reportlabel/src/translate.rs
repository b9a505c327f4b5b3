//! Translation clients backed by an external program or by files.
//!
//! Process protocol: the program receives one JSON request on stdin,
//! `{"texts": [...], "pivot": "de", "beam": 1}`, and must print
//! `{"outputs": [...]}` with one string per input, in order.
//!
//! Batch files: inputs are written one per line for an offline run; the
//! translated file must have the same number of lines in the same order.
//! Normalized report text never contains a newline.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use reportlabel_core::augment::{Backtranslate, TranslationConfig, TranslationError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize)]
struct Request<'a> {
    texts: &'a [&'a str],
    pivot: &'a str,
    beam: usize,
}

#[derive(Debug, Deserialize)]
struct Response {
    outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ProcessClient {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    pub config: TranslationConfig,
}

impl ProcessClient {
    pub fn new(command: Vec<String>, config: TranslationConfig) -> Self {
        assert!(!command.is_empty(), "command names a program");
        ProcessClient { command, config }
    }

    fn call(&self, texts: &[&str]) -> Result<Vec<String>, TranslationError> {
        let client = |m: String| TranslationError::Client(m);
        let request = serde_json::to_vec(&Request {
            texts,
            pivot: &self.config.pivot_language,
            beam: self.config.beam_size,
        })
        .map_err(|e| client(e.to_string()))?;
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| client(format!("{}: {e}", self.command[0])))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(&request));
        let output = child.wait_with_output().map_err(|e| client(e.to_string()))?;
        writer.join().expect("writer thread").map_err(|e| client(e.to_string()))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            return Err(client(format!("{} exited with {}: {}", self.command[0], output.status, stderr.trim())));
        }
        let response: Response = serde_json::from_slice(&output.stdout).map_err(|e| client(format!("bad response: {e}")))?;
        if response.outputs.len() != texts.len() {
            return Err(TranslationError::Count {
                expected: texts.len(),
                got: response.outputs.len(),
            });
        }
        Ok(response.outputs)
    }
}

impl Backtranslate for ProcessClient {
    fn backtranslate(&self, text: &str) -> Result<String, TranslationError> {
        self.call(&[text]).map(|mut v| v.remove(0))
    }

    /// One request per batch; a failed request fails every item in it.
    fn backtranslate_batch(&self, texts: &[&str]) -> Vec<Result<String, TranslationError>> {
        match self.call(texts) {
            Ok(outputs) => outputs.into_iter().map(Ok).collect(),
            Err(e) => vec![Err(e); texts.len()],
        }
    }
}

pub fn write_batch_input(path: &Path, texts: &[&str]) -> std::io::Result<()> {
    let mut body = texts.join("\n");
    if !texts.is_empty() {
        body.push('\n');
    }
    fs::write(path, body)
}

/// Serves translations produced offline from a batch input file.
#[derive(Debug, Clone)]
pub struct BatchFileClient {
    pub path: PathBuf,
    lines: Vec<String>,
}

impl BatchFileClient {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(BatchFileClient {
            path: path.to_path_buf(),
            lines: text.lines().map(str::to_string).collect(),
        })
    }
}

impl Backtranslate for BatchFileClient {
    fn backtranslate(&self, _text: &str) -> Result<String, TranslationError> {
        Err(TranslationError::Client("batch files only serve whole batches".into()))
    }

    fn backtranslate_batch(&self, texts: &[&str]) -> Vec<Result<String, TranslationError>> {
        if texts.len() != self.lines.len() {
            let err = TranslationError::Count {
                expected: texts.len(),
                got: self.lines.len(),
            };
            return vec![Err(err); texts.len()];
        }
        self.lines.iter().cloned().map(Ok).collect()
    }
}
