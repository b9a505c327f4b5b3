//! WordPiece tokenization compatible with BERT `vocab.txt` files.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

const CONTINUATION: &str = "##";
const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenizerError {
    #[error("vocabulary is missing special token {0}")]
    MissingSpecial(&'static str),
    #[error("vocabulary is empty")]
    Empty,
}

/// Token ↔ id table. Ids are line numbers in `vocab.txt`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = TokenizerError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Vocab::from_tokens(tokens)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, TokenizerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(TokenizerError::Empty);
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            // First occurrence wins, like the reference implementation.
            index.entry(t.clone()).or_insert(i as u32);
        }
        for special in [PAD, UNK, CLS, SEP] {
            if !index.contains_key(special) {
                return Err(TokenizerError::MissingSpecial(special));
            }
        }
        Ok(Vocab { tokens, index })
    }

    /// One token per line.
    pub fn from_text(text: &str) -> Result<Self, TokenizerError> {
        Vocab::from_tokens(text.lines().map(|l| l.trim_end_matches('\r')))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Word-level vocabulary over the basic tokens of `texts`, specials
    /// first, remaining tokens sorted.
    pub fn build<'a, I>(texts: I, lowercase: bool) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut words = BTreeSet::new();
        for text in texts {
            for w in basic_tokenize(text, lowercase) {
                words.insert(w);
            }
        }
        let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| s.to_string()).collect();
        for w in words {
            if !tokens.contains(&w) {
                tokens.push(w);
            }
        }
        Vocab::from_tokens(tokens).expect("specials present")
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation() || ('\u{2000}'..='\u{206f}').contains(&c) && !c.is_whitespace()
}

/// Whitespace split, control-character removal, optional lowercasing and
/// punctuation isolation.
pub fn basic_tokenize(text: &str, lowercase: bool) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, out: &mut Vec<String>| {
        if !current.is_empty() {
            out.push(core::mem::take(current));
        }
    };
    for c in text.chars() {
        if c == '\0' || c == '\u{fffd}' || (c.is_control() && !c.is_whitespace()) {
            continue;
        }
        if c.is_whitespace() {
            flush(&mut current, &mut out);
        } else if is_punctuation(c) {
            flush(&mut current, &mut out);
            out.push(c.to_string());
        } else if lowercase {
            current.extend(c.to_lowercase());
        } else {
            current.push(c);
        }
    }
    flush(&mut current, &mut out);
    out
}

/// Token ids for one report, `[CLS] content… [SEP]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    /// Content tokens dropped by truncation.
    pub dropped: usize,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPieceTokenizer {
    vocab: Vocab,
    lowercase: bool,
}

impl WordPieceTokenizer {
    pub fn new(vocab: Vocab, lowercase: bool) -> Self {
        WordPieceTokenizer { vocab, lowercase }
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    fn special(&self, token: &str) -> u32 {
        self.vocab.id(token).expect("special tokens validated by Vocab")
    }

    pub fn pad_id(&self) -> u32 {
        self.special(PAD)
    }

    pub fn cls_id(&self) -> u32 {
        self.special(CLS)
    }

    pub fn sep_id(&self) -> u32 {
        self.special(SEP)
    }

    fn wordpiece(&self, word: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(self.special(UNK));
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        let mut candidate = String::new();
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while start < end {
                candidate.clear();
                if start > 0 {
                    candidate.push_str(CONTINUATION);
                }
                candidate.extend(&chars[start..end]);
                if let Some(id) = self.vocab.id(&candidate) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => {
                    out.push(self.special(UNK));
                    return;
                }
            }
            start = end;
        }
        out.extend(pieces);
    }

    /// Content token ids without special markers.
    pub fn encode(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for word in basic_tokenize(text, self.lowercase) {
            self.wordpiece(&word, &mut ids);
        }
        ids
    }

    /// `[CLS] content [SEP]`, keeping the content prefix so the whole
    /// sequence fits in `max_tokens` (at least 2).
    pub fn tokenize_and_truncate(&self, text: &str, max_tokens: usize) -> TokenSequence {
        let content = self.encode(text);
        let room = max_tokens.saturating_sub(2);
        let kept = content.len().min(room);
        let mut ids = Vec::with_capacity(kept + 2);
        ids.push(self.cls_id());
        ids.extend_from_slice(&content[..kept]);
        ids.push(self.sep_id());
        TokenSequence {
            ids,
            dropped: content.len() - kept,
        }
    }
}
