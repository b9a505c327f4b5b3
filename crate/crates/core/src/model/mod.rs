//! The multi-head report classifier: a BERT-style encoder whose pooled
//! output feeds one affine head per condition.

pub mod classifier;
pub mod encoder;
pub mod heads;
pub mod kernels;
pub mod tokenizer;

use alloc::vec;
use alloc::vec::Vec;

pub use classifier::{
    decode_logits, EncoderAdapter, FreezeMode, HeadInputMode, Logits, ModelSnapshot, MultiHeadClassifier, ShapeError,
    TokenBatch,
};
pub use encoder::{Encoder, EncoderConfig, InitScheme};
pub use heads::{ClassificationHeads, LOGITS_PER_ITEM};
pub use tokenizer::{TokenSequence, Vocab, WordPieceTokenizer};

/// A trainable tensor with a lazily allocated gradient buffer.
#[derive(Debug, Clone)]
pub struct Param {
    value: Vec<f32>,
    grad: Vec<f32>,
}

impl Param {
    pub fn new(value: Vec<f32>) -> Self {
        Param { value, grad: Vec::new() }
    }

    pub fn zeros(len: usize) -> Self {
        Param::new(vec![0.0; len])
    }

    pub fn filled(len: usize, v: f32) -> Self {
        Param::new(vec![v; len])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn value(&self) -> &[f32] {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut [f32] {
        &mut self.value
    }

    /// Accumulated gradient; empty until the first backward pass.
    pub fn grad(&self) -> &[f32] {
        &self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
    }

    /// Weights and (allocated) gradient, borrowed together.
    pub fn parts(&mut self) -> (&[f32], &mut [f32]) {
        if self.grad.len() != self.value.len() {
            self.grad = vec![0.0; self.value.len()];
        }
        (&self.value, &mut self.grad)
    }

    /// Mutable weights alongside the read-only gradient.
    pub fn value_and_grad_mut(&mut self) -> (&mut [f32], &[f32]) {
        (&mut self.value, &self.grad)
    }
}

/// Deterministic N(0, std²) initializer (Box–Muller over ChaCha8).
pub(crate) struct NormalInit {
    rng: rand_chacha::ChaCha8Rng,
    spare: Option<f32>,
}

impl NormalInit {
    pub(crate) fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        NormalInit {
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn standard(&mut self) -> f32 {
        use rand::Rng;
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some((r * libm::sin(theta)) as f32);
        (r * libm::cos(theta)) as f32
    }

    pub(crate) fn param(&mut self, len: usize, std: f32) -> Param {
        Param::new((0..len).map(|_| self.standard() * std).collect())
    }
}
