//! Encoder + heads: batching, decoding, the summed cross-entropy loss and
//! its gradient.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::encoder::Encoder;
use super::heads::{logit_offset, ClassificationHeads, LOGITS_PER_ITEM};
use super::tokenizer::{TokenSequence, WordPieceTokenizer};
use super::Param;
use crate::schema::{Condition, LabelClass, LabelVector, NUM_CONDITIONS};

/// What the heads read from the final encoder layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInputMode {
    /// The first-position state.
    Cls,
    /// Mean of all non-padding states, markers included.
    TokenAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeMode {
    None,
    EncoderFrozen,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ShapeError {
    #[error("batch has {ids} ids and {mask} mask entries; expected {expected}")]
    Size { ids: usize, mask: usize, expected: usize },
    #[error("item {0} has padding before content")]
    MaskNotPrefix(usize),
    #[error("item {item} has length {len}, above the {max}-token limit")]
    TooLong { item: usize, len: usize, max: usize },
    #[error("item {item} has token id {id} outside the vocabulary of {vocab}")]
    TokenId { item: usize, id: u32, vocab: usize },
    #[error("item {0} is empty")]
    Empty(usize),
    #[error("{batch} inputs but {gold} gold label vectors")]
    GoldLength { batch: usize, gold: usize },
    #[error("snapshot does not match model: {0}")]
    Snapshot(String),
    #[error("heads expect hidden size {heads}, encoder produces {encoder}")]
    Hidden { heads: usize, encoder: usize },
}

/// Right-padded token ids with a validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenBatch {
    ids: Vec<u32>,
    mask: Vec<bool>,
    batch_size: usize,
    seq_len: usize,
}

impl TokenBatch {
    pub fn new(ids: Vec<u32>, mask: Vec<bool>, batch_size: usize, seq_len: usize) -> Result<Self, ShapeError> {
        let expected = batch_size * seq_len;
        if ids.len() != expected || mask.len() != expected {
            return Err(ShapeError::Size {
                ids: ids.len(),
                mask: mask.len(),
                expected,
            });
        }
        Ok(TokenBatch {
            ids,
            mask,
            batch_size,
            seq_len,
        })
    }

    pub fn from_sequences(seqs: &[&TokenSequence], pad_id: u32) -> Self {
        let seq_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = vec![pad_id; seqs.len() * seq_len];
        let mut mask = vec![false; seqs.len() * seq_len];
        for (b, s) in seqs.iter().enumerate() {
            ids[b * seq_len..b * seq_len + s.len()].copy_from_slice(&s.ids);
            mask[b * seq_len..b * seq_len + s.len()].iter_mut().for_each(|m| *m = true);
        }
        TokenBatch {
            ids,
            mask,
            batch_size: seqs.len(),
            seq_len,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Unpadded ids of one item.
    fn item(&self, b: usize) -> Result<&[u32], ShapeError> {
        let mask = &self.mask[b * self.seq_len..(b + 1) * self.seq_len];
        let len = mask.iter().take_while(|m| **m).count();
        if mask[len..].iter().any(|m| *m) {
            return Err(ShapeError::MaskNotPrefix(b));
        }
        if len == 0 {
            return Err(ShapeError::Empty(b));
        }
        Ok(&self.ids[b * self.seq_len..b * self.seq_len + len])
    }
}

/// Row-major `[batch × LOGITS_PER_ITEM]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    data: Vec<f64>,
    batch_size: usize,
}

impl Logits {
    pub fn from_raw(data: Vec<f64>) -> Self {
        assert_eq!(data.len() % LOGITS_PER_ITEM, 0);
        let batch_size = data.len() / LOGITS_PER_ITEM;
        Logits { data, batch_size }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn item(&self, b: usize) -> &[f64] {
        &self.data[b * LOGITS_PER_ITEM..(b + 1) * LOGITS_PER_ITEM]
    }

    pub fn block(&self, b: usize, condition: Condition) -> &[f64] {
        let off = logit_offset(condition);
        &self.item(b)[off..off + condition.num_classes()]
    }

    /// Block sizes for one item, in condition order.
    pub fn block_sizes(&self) -> [usize; NUM_CONDITIONS] {
        Condition::ALL.map(Condition::num_classes)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// First index of the maximum; ties go to the lowest class index.
fn argmax(block: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in block.iter().enumerate().skip(1) {
        if v > block[best] {
            best = i;
        }
    }
    best
}

pub fn decode_logits(logits: &Logits) -> Vec<LabelVector> {
    (0..logits.batch_size())
        .map(|b| {
            let mut labels = [LabelClass::Blank; NUM_CONDITIONS];
            for c in Condition::ALL {
                labels[c.index()] = LabelClass::ALL[argmax(logits.block(b, c))];
            }
            LabelVector::new(labels).expect("No Finding head has two classes")
        })
        .collect()
}

/// `logsumexp(z) - z[target]` and the softmax.
fn cross_entropy(block: &[f64], target: usize) -> (f64, Vec<f64>) {
    let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = block.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = exps.iter().sum();
    let loss = max + libm::log(sum) - block[target];
    (loss, exps.into_iter().map(|e| e / sum).collect())
}

/// Summed per-head mean cross-entropy, with `∂L/∂logits` for each item.
pub fn loss_and_logit_grads(logits: &Logits, gold: &[LabelVector]) -> Result<(f64, Vec<f64>), ShapeError> {
    let n = logits.batch_size();
    if gold.len() != n {
        return Err(ShapeError::GoldLength { batch: n, gold: gold.len() });
    }
    let mut grads = vec![0.0f64; n * LOGITS_PER_ITEM];
    let mut total = 0.0;
    if n == 0 {
        return Ok((0.0, grads));
    }
    let inv = 1.0 / n as f64;
    for (b, g) in gold.iter().enumerate() {
        for c in Condition::ALL {
            let target = g.get(c).index();
            let (loss, probs) = cross_entropy(logits.block(b, c), target);
            total += loss * inv;
            let off = b * LOGITS_PER_ITEM + logit_offset(c);
            for (k, p) in probs.iter().enumerate() {
                let onehot = if k == target { 1.0 } else { 0.0 };
                grads[off + k] = (p - onehot) * inv;
            }
        }
    }
    Ok((total, grads))
}

/// Encoder weights plus the tokenizer that produces their inputs.
#[derive(Debug, Clone)]
pub struct EncoderAdapter {
    pub encoder: Encoder,
    pub tokenizer: WordPieceTokenizer,
}

impl EncoderAdapter {
    pub fn new(encoder: Encoder, tokenizer: WordPieceTokenizer) -> Self {
        EncoderAdapter { encoder, tokenizer }
    }

    pub fn name(&self) -> &str {
        &self.encoder.config().name
    }

    pub fn hidden_size(&self) -> usize {
        self.encoder.hidden_size()
    }

    pub fn max_tokens(&self) -> usize {
        self.encoder.max_tokens()
    }

    pub fn tokenize(&self, text: &str) -> TokenSequence {
        self.tokenizer.tokenize_and_truncate(text, self.max_tokens())
    }

    pub fn batch(&self, texts: &[&str]) -> TokenBatch {
        let seqs: Vec<TokenSequence> = texts.iter().map(|t| self.tokenize(t)).collect();
        let refs: Vec<&TokenSequence> = seqs.iter().collect();
        TokenBatch::from_sequences(&refs, self.tokenizer.pad_id())
    }
}

/// Named parameter values, restorable into a model of the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub params: Vec<(String, Vec<f32>)>,
}

impl ModelSnapshot {
    pub fn get(&self, name: &str) -> Option<&[f32]> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Only the `heads.*` entries.
    pub fn heads(&self) -> Vec<(String, Vec<f32>)> {
        self.params.iter().filter(|(n, _)| n.starts_with("heads.")).cloned().collect()
    }

    /// Only the `encoder.*` entries.
    pub fn encoder(&self) -> Vec<(String, Vec<f32>)> {
        self.params.iter().filter(|(n, _)| n.starts_with("encoder.")).cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadClassifier {
    pub adapter: EncoderAdapter,
    pub heads: ClassificationHeads,
    pub head_input_mode: HeadInputMode,
    pub freeze_mode: FreezeMode,
}

impl MultiHeadClassifier {
    /// Zero-initialized heads over `adapter`, CLS input, nothing frozen.
    pub fn new(adapter: EncoderAdapter) -> Self {
        let heads = ClassificationHeads::zeros(adapter.hidden_size());
        MultiHeadClassifier {
            adapter,
            heads,
            head_input_mode: HeadInputMode::Cls,
            freeze_mode: FreezeMode::None,
        }
    }

    pub fn with_heads(adapter: EncoderAdapter, heads: ClassificationHeads) -> Result<Self, ShapeError> {
        if heads.hidden_size() != adapter.hidden_size() {
            return Err(ShapeError::Hidden {
                heads: heads.hidden_size(),
                encoder: adapter.hidden_size(),
            });
        }
        Ok(MultiHeadClassifier {
            adapter,
            heads,
            head_input_mode: HeadInputMode::Cls,
            freeze_mode: FreezeMode::None,
        })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.adapter.encoder
    }

    fn check_item<'a>(&self, batch: &'a TokenBatch, b: usize) -> Result<&'a [u32], ShapeError> {
        let ids = batch.item(b)?;
        let max = self.adapter.max_tokens();
        if ids.len() > max {
            return Err(ShapeError::TooLong { item: b, len: ids.len(), max });
        }
        let vocab = self.adapter.encoder.config().vocab_size;
        if let Some(&id) = ids.iter().find(|&&id| id as usize >= vocab) {
            return Err(ShapeError::TokenId { item: b, id, vocab });
        }
        Ok(ids)
    }

    fn pool(&self, hidden: &[f32], len: usize) -> Vec<f32> {
        let h = self.adapter.hidden_size();
        match self.head_input_mode {
            HeadInputMode::Cls => hidden[..h].to_vec(),
            HeadInputMode::TokenAverage => {
                let mut out = vec![0.0f32; h];
                for t in 0..len {
                    for j in 0..h {
                        out[j] += hidden[t * h + j];
                    }
                }
                let inv = 1.0 / len as f32;
                out.iter_mut().for_each(|v| *v *= inv);
                out
            }
        }
    }

    /// `∂L/∂hidden` from `∂L/∂pooled`.
    fn unpool(&self, d_pooled: &[f32], len: usize) -> Vec<f32> {
        let h = self.adapter.hidden_size();
        let mut d = vec![0.0f32; len * h];
        match self.head_input_mode {
            HeadInputMode::Cls => d[..h].copy_from_slice(d_pooled),
            HeadInputMode::TokenAverage => {
                let inv = 1.0 / len as f32;
                for t in 0..len {
                    for j in 0..h {
                        d[t * h + j] = d_pooled[j] * inv;
                    }
                }
            }
        }
        d
    }

    /// Pooled head inputs, one `hidden_size` row per item.
    pub fn pooled(&self, batch: &TokenBatch) -> Result<Vec<Vec<f32>>, ShapeError> {
        (0..batch.batch_size())
            .map(|b| {
                let ids = self.check_item(batch, b)?;
                let hidden = self.adapter.encoder.forward(ids);
                Ok(self.pool(&hidden, ids.len()))
            })
            .collect()
    }

    /// Evaluation-mode logits.
    pub fn forward(&self, batch: &TokenBatch) -> Result<Logits, ShapeError> {
        let pooled = self.pooled(batch)?;
        let mut data = vec![0.0f64; pooled.len() * LOGITS_PER_ITEM];
        for (b, p) in pooled.iter().enumerate() {
            self.heads.forward(p, &mut data[b * LOGITS_PER_ITEM..(b + 1) * LOGITS_PER_ITEM]);
        }
        Ok(Logits::from_raw(data))
    }

    pub fn predict(&self, batch: &TokenBatch) -> Result<Vec<LabelVector>, ShapeError> {
        Ok(decode_logits(&self.forward(batch)?))
    }

    pub fn loss(&self, batch: &TokenBatch, gold: &[LabelVector]) -> Result<f64, ShapeError> {
        if gold.len() != batch.batch_size() {
            return Err(ShapeError::GoldLength {
                batch: batch.batch_size(),
                gold: gold.len(),
            });
        }
        Ok(loss_and_logit_grads(&self.forward(batch)?, gold)?.0)
    }

    /// Adds `∂loss/∂θ` to the gradient buffers of every trainable parameter
    /// and returns the loss. The encoder is skipped when frozen.
    pub fn accumulate_gradients(&mut self, batch: &TokenBatch, gold: &[LabelVector]) -> Result<f64, ShapeError> {
        let n = batch.batch_size();
        if gold.len() != n {
            return Err(ShapeError::GoldLength { batch: n, gold: gold.len() });
        }
        let items: Vec<&[u32]> = (0..n).map(|b| self.check_item(batch, b)).collect::<Result<_, _>>()?;
        let inv = 1.0 / n.max(1) as f64;
        let mut total = 0.0;
        for (ids, g) in items.into_iter().zip(gold) {
            let train_encoder = self.freeze_mode == FreezeMode::None;
            let (hidden, cache) = if train_encoder {
                let (h, c) = self.adapter.encoder.forward_train(ids);
                (h, Some(c))
            } else {
                (self.adapter.encoder.forward(ids), None)
            };
            let pooled = self.pool(&hidden, ids.len());
            let mut logits = vec![0.0f64; LOGITS_PER_ITEM];
            self.heads.forward(&pooled, &mut logits);
            let (loss, mut d_logits) = loss_and_logit_grads(&Logits::from_raw(logits), core::slice::from_ref(g))?;
            total += loss * inv;
            d_logits.iter_mut().for_each(|d| *d *= inv);
            let d_pooled = self.heads.backward(&pooled, &d_logits);
            if let Some(cache) = cache {
                let d_hidden = self.unpool(&d_pooled, ids.len());
                self.adapter.encoder.backward(&cache, &d_hidden);
            }
        }
        Ok(total)
    }

    pub fn zero_grad(&mut self) {
        for p in self.all_params_mut() {
            p.zero_grad();
        }
    }

    /// Every parameter, encoder first, in snapshot order.
    pub fn all_params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.adapter.encoder.params_mut();
        out.extend(self.heads.params_mut());
        out
    }

    /// Parameters the optimizer may update under the current freeze mode.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Param> {
        match self.freeze_mode {
            FreezeMode::None => self.all_params_mut(),
            FreezeMode::EncoderFrozen => self.heads.params_mut(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .adapter
            .encoder
            .named_params()
            .into_iter()
            .map(|(n, _)| alloc::format!("encoder.{n}"))
            .collect();
        for c in Condition::ALL {
            names.push(alloc::format!("heads.{}.weight", c.index()));
            names.push(alloc::format!("heads.{}.bias", c.index()));
        }
        names
    }

    pub fn snapshot(&self) -> ModelSnapshot {
        let mut values: Vec<Vec<f32>> = self
            .adapter
            .encoder
            .named_params()
            .into_iter()
            .map(|(_, p)| p.value().to_vec())
            .collect();
        values.extend(self.heads.params().into_iter().map(|p| p.value().to_vec()));
        ModelSnapshot {
            params: self.param_names().into_iter().zip(values).collect(),
        }
    }

    /// Overwrite weights from a snapshot with identical names and shapes.
    pub fn restore(&mut self, snapshot: &ModelSnapshot) -> Result<(), ShapeError> {
        let names = self.param_names();
        if names.len() != snapshot.params.len() {
            return Err(ShapeError::Snapshot(alloc::format!(
                "{} tensors, model has {}",
                snapshot.params.len(),
                names.len()
            )));
        }
        for (name, (snap_name, _)) in names.iter().zip(&snapshot.params) {
            if name != snap_name {
                return Err(ShapeError::Snapshot(alloc::format!("expected {name}, found {snap_name}")));
            }
        }
        for (p, (name, values)) in self.all_params_mut().into_iter().zip(&snapshot.params) {
            if p.len() != values.len() {
                return Err(ShapeError::Snapshot(alloc::format!(
                    "{name} has {} values, model expects {}",
                    values.len(),
                    p.len()
                )));
            }
        }
        for (p, (_, values)) in self.all_params_mut().into_iter().zip(&snapshot.params) {
            p.value_mut().copy_from_slice(values);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::encoder::EncoderConfig;
    use crate::model::tokenizer::Vocab;

    fn model(seed: u64) -> MultiHeadClassifier {
        let vocab = Vocab::build(["no edema small effusion rib fracture tube"].iter().copied(), true);
        let mut cfg = EncoderConfig::tiny("unit", vocab.len());
        cfg.hidden_size = 16;
        cfg.num_heads = 2;
        cfg.intermediate_size = 24;
        cfg.max_tokens = 12;
        let enc = Encoder::random(cfg, 0.5, seed).unwrap();
        let heads = ClassificationHeads::random(16, 0.3, seed + 1);
        MultiHeadClassifier::with_heads(EncoderAdapter::new(enc, WordPieceTokenizer::new(vocab, true)), heads).unwrap()
    }

    #[test]
    fn forward_block_shapes() {
        let m = model(1);
        let logits = m.forward(&m.adapter.batch(&["no edema"])).unwrap();
        assert_eq!(logits.batch_size(), 1);
        let sizes = logits.block_sizes();
        assert_eq!(sizes.iter().filter(|&&s| s == 4).count(), 13);
        assert_eq!(sizes[Condition::NoFinding.index()], 2);
        assert_eq!(logits.block(0, Condition::NoFinding).len(), 2);
    }

    #[test]
    fn duplicated_inputs_give_identical_rows() {
        let m = model(2);
        let logits = m.forward(&m.adapter.batch(&["small effusion", "small effusion", "rib"])).unwrap();
        assert_eq!(logits.item(0), logits.item(1));
        assert_ne!(logits.item(0), logits.item(2));
    }

    #[test]
    fn padding_does_not_change_outputs() {
        let m = model(3);
        let alone = m.forward(&m.adapter.batch(&["rib"])).unwrap();
        let padded = m.forward(&m.adapter.batch(&["rib", "no edema small effusion rib fracture"])).unwrap();
        assert_eq!(alone.item(0), padded.item(0));
    }

    #[test]
    fn token_average_without_padding_is_plain_mean() {
        let mut m = model(4);
        m.head_input_mode = HeadInputMode::TokenAverage;
        let batch = m.adapter.batch(&["no edema", "rib fracture"]);
        let pooled = m.pooled(&batch).unwrap();
        for b in 0..2 {
            let ids = batch.item(b).unwrap();
            let hidden = m.adapter.encoder.forward(ids);
            let h = m.adapter.hidden_size();
            for j in 0..h {
                let direct: f32 = (0..ids.len()).map(|t| hidden[t * h + j]).sum::<f32>() / ids.len() as f32;
                assert!((pooled[b][j] - direct).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn malformed_batches_are_shape_errors() {
        let m = model(5);
        assert!(matches!(TokenBatch::new(vec![2, 3], vec![true], 1, 2), Err(ShapeError::Size { .. })));
        let holes = TokenBatch::new(vec![2, 0, 3], vec![true, false, true], 1, 3).unwrap();
        assert_eq!(m.forward(&holes), Err(ShapeError::MaskNotPrefix(0)));
        let big_id = TokenBatch::new(vec![2, 999], vec![true, true], 1, 2).unwrap();
        assert!(matches!(m.forward(&big_id), Err(ShapeError::TokenId { .. })));
        let long = TokenBatch::new(vec![2; 13], vec![true; 13], 1, 13).unwrap();
        assert!(matches!(m.forward(&long), Err(ShapeError::TooLong { .. })));
        let empty = TokenBatch::new(vec![0, 0], vec![false, false], 1, 2).unwrap();
        assert_eq!(m.forward(&empty), Err(ShapeError::Empty(0)));
        let ok = m.adapter.batch(&["rib"]);
        assert!(matches!(m.loss(&ok, &[]), Err(ShapeError::GoldLength { .. })));
    }

    fn logits_with(block: &[f64], nf: &[f64]) -> Logits {
        let mut data = Vec::new();
        for c in Condition::ALL {
            if c == Condition::NoFinding {
                data.extend_from_slice(nf);
            } else {
                data.extend_from_slice(block);
            }
        }
        Logits::from_raw(data)
    }

    #[test]
    fn decode_examples() {
        let all_blank = decode_logits(&logits_with(&[9.0, 0.0, 0.0, 0.0], &[9.0, 0.0]));
        assert_eq!(all_blank, vec![LabelVector::blank()]);
        let nf = decode_logits(&logits_with(&[9.0, 0.0, 0.0, 0.0], &[0.0, 5.0]));
        assert_eq!(nf[0].get(Condition::NoFinding), LabelClass::Positive);
        let tied = decode_logits(&logits_with(&[1.0, 1.0, 0.0, 0.0], &[3.0, 3.0]));
        assert_eq!(tied, vec![LabelVector::blank()]);
        let unc = decode_logits(&logits_with(&[0.0, 1.0, 2.0, 3.0], &[0.0, 0.0]));
        assert_eq!(unc[0].get(Condition::Edema), LabelClass::Uncertain);
    }

    #[test]
    fn uniform_logits_loss_is_closed_form() {
        let logits = logits_with(&[0.3; 4], &[0.3; 2]);
        let (loss, _) = loss_and_logit_grads(&logits, &[LabelVector::blank()]).unwrap();
        let expected = 13.0 * libm::log(4.0) + libm::log(2.0);
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn confident_correct_logits_drive_loss_to_zero() {
        let mut prev = f64::INFINITY;
        for scale in [1.0, 10.0, 100.0] {
            let logits = logits_with(&[scale, 0.0, 0.0, 0.0], &[scale, 0.0]);
            let (loss, _) = loss_and_logit_grads(&logits, &[LabelVector::blank()]).unwrap();
            assert!(loss >= 0.0 && loss < prev);
            prev = loss;
        }
        assert!(prev < 1e-30);
    }

    #[test]
    fn loss_is_invariant_to_per_head_shift() {
        let gold = LabelVector::blank().with(Condition::Edema, LabelClass::Negative).unwrap();
        let base: Vec<f64> = (0..LOGITS_PER_ITEM).map(|i| (i % 5) as f64 * 0.7 - 1.0).collect();
        let mut shifted = base.clone();
        let off = logit_offset(Condition::Edema);
        for v in &mut shifted[off..off + 4] {
            *v += 12.5;
        }
        let a = loss_and_logit_grads(&Logits::from_raw(base), &[gold]).unwrap().0;
        let b = loss_and_logit_grads(&Logits::from_raw(shifted), &[gold]).unwrap().0;
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn snapshot_round_trip_and_mismatch() {
        let a = model(6);
        let mut b = model(7);
        assert_ne!(a.snapshot(), b.snapshot());
        b.restore(&a.snapshot()).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        let mut bad = a.snapshot();
        bad.params.pop();
        assert!(matches!(b.restore(&bad), Err(ShapeError::Snapshot(_))));
    }

    #[test]
    fn frozen_encoder_gets_no_gradients() {
        let mut m = model(8);
        m.freeze_mode = FreezeMode::EncoderFrozen;
        let batch = m.adapter.batch(&["no edema", "rib"]);
        m.accumulate_gradients(&batch, &[LabelVector::blank(); 2]).unwrap();
        assert!(m.adapter.encoder.params_mut().iter().all(|p| p.grad().is_empty()));
        assert!(m.heads.params().iter().all(|p| !p.grad().is_empty()));
    }
}
