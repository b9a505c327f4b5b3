//! One affine map per condition from the pooled state to class logits.

use alloc::vec;
use alloc::vec::Vec;

use super::{NormalInit, Param};
use crate::schema::{Condition, NUM_CONDITIONS};

/// 13 four-way heads and the two-way No Finding head.
pub const LOGITS_PER_ITEM: usize = 13 * 4 + 2;

/// Offset of each condition's block within an item's logits.
pub const fn logit_offset(condition: Condition) -> usize {
    let mut off = 0;
    let mut i = 0;
    while i < condition.index() {
        off += Condition::ALL[i].num_classes();
        i += 1;
    }
    off
}

#[derive(Debug, Clone)]
pub struct ClassificationHeads {
    hidden_size: usize,
    weights: Vec<Param>,
    biases: Vec<Param>,
}

impl ClassificationHeads {
    /// All-zero heads: every class starts tied.
    pub fn zeros(hidden_size: usize) -> Self {
        ClassificationHeads {
            hidden_size,
            weights: Condition::ALL.iter().map(|c| Param::zeros(c.num_classes() * hidden_size)).collect(),
            biases: Condition::ALL.iter().map(|c| Param::zeros(c.num_classes())).collect(),
        }
    }

    pub fn random(hidden_size: usize, std: f32, seed: u64) -> Self {
        let mut init = NormalInit::new(seed);
        ClassificationHeads {
            hidden_size,
            weights: Condition::ALL.iter().map(|c| init.param(c.num_classes() * hidden_size, std)).collect(),
            biases: Condition::ALL.iter().map(|c| Param::zeros(c.num_classes())).collect(),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// `13·(4h + 4) + (2h + 2)`.
    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Param::len).sum()
    }

    pub fn weight(&self, condition: Condition) -> &Param {
        &self.weights[condition.index()]
    }

    pub fn bias(&self, condition: Condition) -> &Param {
        &self.biases[condition.index()]
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::with_capacity(2 * NUM_CONDITIONS);
        for i in 0..NUM_CONDITIONS {
            out.push(&self.weights[i]);
            out.push(&self.biases[i]);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    /// Writes `LOGITS_PER_ITEM` logits for one pooled vector.
    pub fn forward(&self, pooled: &[f32], out: &mut [f64]) {
        let h = self.hidden_size;
        for c in Condition::ALL {
            let off = logit_offset(c);
            let w = self.weights[c.index()].value();
            let b = self.biases[c.index()].value();
            for k in 0..c.num_classes() {
                let row = &w[k * h..(k + 1) * h];
                let mut acc = b[k] as f64;
                for (x, y) in row.iter().zip(pooled) {
                    acc += (*x as f64) * (*y as f64);
                }
                out[off + k] = acc;
            }
        }
    }

    /// Accumulates head gradients and returns `∂L/∂pooled`.
    pub fn backward(&mut self, pooled: &[f32], d_logits: &[f64]) -> Vec<f32> {
        let h = self.hidden_size;
        let mut d_pooled = vec![0.0f64; h];
        for c in Condition::ALL {
            let off = logit_offset(c);
            let (w, dw) = self.weights[c.index()].parts();
            let (_, db) = self.biases[c.index()].parts();
            for k in 0..c.num_classes() {
                let g = d_logits[off + k];
                db[k] += g as f32;
                let row = &w[k * h..(k + 1) * h];
                let drow = &mut dw[k * h..(k + 1) * h];
                for i in 0..h {
                    drow[i] += (g * pooled[i] as f64) as f32;
                    d_pooled[i] += g * row[i] as f64;
                }
            }
        }
        d_pooled.into_iter().map(|v| v as f32).collect()
    }
}
