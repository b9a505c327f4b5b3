//! BERT-style transformer encoder (post-LayerNorm, exact GELU, no pooler).
//!
//! Sequences are processed one at a time at their unpadded length, so
//! padding never enters attention.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernels::{self, LayerNormCache};
use super::{NormalInit, Param};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Weight-source identifier, e.g. `bert-base-uncased` or a biomedical
    /// variant. Informational only.
    pub name: String,
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub intermediate_size: usize,
    /// Longest accepted sequence, markers included.
    pub max_tokens: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f32,
}

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f32 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{0} must be positive")]
    Zero(&'static str),
    #[error("hidden size {hidden} is not divisible by {heads} attention heads")]
    HeadSplit { hidden: usize, heads: usize },
    #[error("max_tokens must be at least 2 to hold the start and end markers")]
    TooShort,
}

impl EncoderConfig {
    /// The 12-layer, 768-wide base configuration.
    pub fn bert_base(name: impl Into<String>, vocab_size: usize) -> Self {
        EncoderConfig {
            name: name.into(),
            vocab_size,
            hidden_size: 768,
            num_layers: 12,
            num_heads: 12,
            intermediate_size: 3072,
            max_tokens: 512,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    /// Two layers, hidden size 64: the CPU test encoder.
    pub fn tiny(name: impl Into<String>, vocab_size: usize) -> Self {
        EncoderConfig {
            name: name.into(),
            vocab_size,
            hidden_size: 64,
            num_layers: 2,
            num_heads: 4,
            intermediate_size: 128,
            max_tokens: 512,
            type_vocab_size: 2,
            layer_norm_eps: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (v, name) in [
            (self.vocab_size, "vocab_size"),
            (self.hidden_size, "hidden_size"),
            (self.num_layers, "num_layers"),
            (self.num_heads, "num_heads"),
            (self.intermediate_size, "intermediate_size"),
            (self.type_vocab_size, "type_vocab_size"),
        ] {
            if v == 0 {
                return Err(ConfigError::Zero(name));
            }
        }
        if self.hidden_size % self.num_heads != 0 {
            return Err(ConfigError::HeadSplit {
                hidden: self.hidden_size,
                heads: self.num_heads,
            });
        }
        if self.max_tokens < 2 {
            return Err(ConfigError::TooShort);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Linear {
    weight: Param,
    bias: Param,
    d_in: usize,
    d_out: usize,
}

impl Linear {
    fn random(init: &mut NormalInit, d_in: usize, d_out: usize, std: f32) -> Self {
        Linear {
            weight: init.param(d_out * d_in, std),
            bias: Param::zeros(d_out),
            d_in,
            d_out,
        }
    }

    fn forward(&self, x: &[f32], rows: usize) -> Vec<f32> {
        kernels::linear(x, rows, self.d_in, self.weight.value(), self.bias.value(), self.d_out)
    }

    fn backward(&mut self, x: &[f32], rows: usize, dy: &[f32]) -> Vec<f32> {
        let (w, dw) = self.weight.parts();
        let (_, db) = self.bias.parts();
        kernels::linear_backward(x, rows, self.d_in, w, self.d_out, dy, dw, db)
    }
}

#[derive(Debug, Clone)]
struct LayerNorm {
    gamma: Param,
    beta: Param,
    dim: usize,
}

impl LayerNorm {
    fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Param::filled(dim, 1.0),
            beta: Param::zeros(dim),
            dim,
        }
    }

    fn forward(&self, x: &[f32], rows: usize, eps: f32) -> (Vec<f32>, LayerNormCache) {
        kernels::layer_norm(x, rows, self.dim, self.gamma.value(), self.beta.value(), eps)
    }

    fn backward(&mut self, cache: &LayerNormCache, rows: usize, dy: &[f32]) -> Vec<f32> {
        let (g, dg) = self.gamma.parts();
        let (_, db) = self.beta.parts();
        kernels::layer_norm_backward(cache, rows, self.dim, g, dy, dg, db)
    }
}

#[derive(Debug, Clone)]
struct Layer {
    query: Linear,
    key: Linear,
    value: Linear,
    attn_out: Linear,
    attn_ln: LayerNorm,
    ffn_in: Linear,
    ffn_out: Linear,
    ffn_ln: LayerNorm,
}

/// Activations one layer needs for its backward pass.
#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    /// `[heads × T × T]` attention probabilities.
    probs: Vec<f32>,
    ctx: Vec<f32>,
    attn_ln: LayerNormCache,
    mid: Vec<f32>,
    ffn_pre: Vec<f32>,
    ffn_act: Vec<f32>,
    ffn_ln: LayerNormCache,
}

/// Forward activations for one sequence, consumed by [`Encoder::backward`].
#[derive(Debug, Clone)]
pub struct SequenceCache {
    ids: Vec<u32>,
    emb_ln: LayerNormCache,
    layers: Vec<LayerCache>,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    config: EncoderConfig,
    word: Param,
    position: Param,
    token_type: Param,
    emb_ln: LayerNorm,
    layers: Vec<Layer>,
}

/// Standard deviations for fresh weights. Biases start at zero and
/// LayerNorm gains at one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitScheme {
    /// Weight matrices and word embeddings.
    pub std: f32,
    /// Position and token-type embeddings. Zero makes the fresh encoder
    /// order-blind, which suits bag-of-trigger corpora.
    pub position_std: f32,
}

impl InitScheme {
    pub fn uniform(std: f32) -> Self {
        InitScheme { std, position_std: std }
    }
}

impl Encoder {
    /// Fresh weights with every tensor drawn from N(0, `init_std`²).
    pub fn random(config: EncoderConfig, init_std: f32, seed: u64) -> Result<Self, ConfigError> {
        Encoder::random_with(config, InitScheme::uniform(init_std), seed)
    }

    pub fn random_with(config: EncoderConfig, scheme: InitScheme, seed: u64) -> Result<Self, ConfigError> {
        config.validate()?;
        let init_std = scheme.std;
        let mut init = NormalInit::new(seed);
        let h = config.hidden_size;
        let word = init.param(config.vocab_size * h, init_std);
        let position = init.param(config.max_tokens * h, scheme.position_std);
        let token_type = init.param(config.type_vocab_size * h, scheme.position_std);
        let layers = (0..config.num_layers)
            .map(|_| Layer {
                query: Linear::random(&mut init, h, h, init_std),
                key: Linear::random(&mut init, h, h, init_std),
                value: Linear::random(&mut init, h, h, init_std),
                attn_out: Linear::random(&mut init, h, h, init_std),
                attn_ln: LayerNorm::new(h),
                ffn_in: Linear::random(&mut init, h, config.intermediate_size, init_std),
                ffn_out: Linear::random(&mut init, config.intermediate_size, h, init_std),
                ffn_ln: LayerNorm::new(h),
            })
            .collect();
        Ok(Encoder {
            word,
            position,
            token_type,
            emb_ln: LayerNorm::new(h),
            layers,
            config,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn hidden_size(&self) -> usize {
        self.config.hidden_size
    }

    pub fn max_tokens(&self) -> usize {
        self.config.max_tokens
    }

    /// Parameters in canonical order with stable names.
    pub fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out: Vec<(String, &Param)> = vec![
            ("embeddings.word".into(), &self.word),
            ("embeddings.position".into(), &self.position),
            ("embeddings.token_type".into(), &self.token_type),
            ("embeddings.ln.gamma".into(), &self.emb_ln.gamma),
            ("embeddings.ln.beta".into(), &self.emb_ln.beta),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            let linears = [
                ("attention.query", &l.query),
                ("attention.key", &l.key),
                ("attention.value", &l.value),
                ("attention.output", &l.attn_out),
                ("ffn.input", &l.ffn_in),
                ("ffn.output", &l.ffn_out),
            ];
            for (name, lin) in linears {
                out.push((format!("layers.{i}.{name}.weight"), &lin.weight));
                out.push((format!("layers.{i}.{name}.bias"), &lin.bias));
            }
            for (name, ln) in [("attention.ln", &l.attn_ln), ("ffn.ln", &l.ffn_ln)] {
                out.push((format!("layers.{i}.{name}.gamma"), &ln.gamma));
                out.push((format!("layers.{i}.{name}.beta"), &ln.beta));
            }
        }
        out
    }

    /// Same order as [`Encoder::named_params`].
    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = vec![
            &mut self.word,
            &mut self.position,
            &mut self.token_type,
            &mut self.emb_ln.gamma,
            &mut self.emb_ln.beta,
        ];
        for l in self.layers.iter_mut() {
            for lin in [
                &mut l.query,
                &mut l.key,
                &mut l.value,
                &mut l.attn_out,
                &mut l.ffn_in,
                &mut l.ffn_out,
            ] {
                out.push(&mut lin.weight);
                out.push(&mut lin.bias);
            }
            for ln in [&mut l.attn_ln, &mut l.ffn_ln] {
                out.push(&mut ln.gamma);
                out.push(&mut ln.beta);
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    /// Final-layer hidden states `[T × H]` for one unpadded sequence.
    pub fn forward(&self, ids: &[u32]) -> Vec<f32> {
        self.run(ids, None)
    }

    /// As [`Encoder::forward`], also returning the backward cache.
    pub fn forward_train(&self, ids: &[u32]) -> (Vec<f32>, SequenceCache) {
        let mut cache = SequenceCache {
            ids: ids.to_vec(),
            emb_ln: LayerNormCache {
                xhat: Vec::new(),
                rstd: Vec::new(),
            },
            layers: Vec::with_capacity(self.layers.len()),
        };
        let out = self.run(ids, Some(&mut cache));
        (out, cache)
    }

    fn run(&self, ids: &[u32], mut cache: Option<&mut SequenceCache>) -> Vec<f32> {
        let h = self.config.hidden_size;
        let t = ids.len();
        let mut x = vec![0.0f32; t * h];
        let word = self.word.value();
        let pos = self.position.value();
        let typ = &self.token_type.value()[..h];
        for (i, &id) in ids.iter().enumerate() {
            let row = &mut x[i * h..(i + 1) * h];
            let w = &word[id as usize * h..(id as usize + 1) * h];
            let p = &pos[i * h..(i + 1) * h];
            for j in 0..h {
                row[j] = w[j] + p[j] + typ[j];
            }
        }
        let (mut x, ln) = self.emb_ln.forward(&x, t, self.config.layer_norm_eps);
        if let Some(c) = cache.as_deref_mut() {
            c.emb_ln = ln;
        }
        for layer in &self.layers {
            let (out, lc) = self.layer_forward(layer, x, t);
            if let Some(c) = cache.as_deref_mut() {
                c.layers.push(lc);
            }
            x = out;
        }
        x
    }

    fn layer_forward(&self, l: &Layer, x: Vec<f32>, t: usize) -> (Vec<f32>, LayerCache) {
        let h = self.config.hidden_size;
        let nh = self.config.num_heads;
        let dh = h / nh;
        let scale = 1.0 / libm::sqrtf(dh as f32);
        let q = l.query.forward(&x, t);
        let k = l.key.forward(&x, t);
        let v = l.value.forward(&x, t);
        let mut probs = vec![0.0f32; nh * t * t];
        let mut ctx = vec![0.0f32; t * h];
        for head in 0..nh {
            let off = head * dh;
            for i in 0..t {
                let qi = &q[i * h + off..i * h + off + dh];
                let row = &mut probs[(head * t + i) * t..(head * t + i + 1) * t];
                for (j, s) in row.iter_mut().enumerate() {
                    let kj = &k[j * h + off..j * h + off + dh];
                    *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f32>() * scale;
                }
                kernels::softmax_in_place(row);
                let ci = &mut ctx[i * h + off..i * h + off + dh];
                for (j, &p) in row.iter().enumerate() {
                    let vj = &v[j * h + off..j * h + off + dh];
                    for d in 0..dh {
                        ci[d] += p * vj[d];
                    }
                }
            }
        }
        let attn = l.attn_out.forward(&ctx, t);
        let resid: Vec<f32> = x.iter().zip(&attn).map(|(a, b)| a + b).collect();
        let (mid, attn_ln) = l.attn_ln.forward(&resid, t, self.config.layer_norm_eps);
        let ffn_pre = l.ffn_in.forward(&mid, t);
        let ffn_act = kernels::gelu(&ffn_pre);
        let ffn = l.ffn_out.forward(&ffn_act, t);
        let resid: Vec<f32> = mid.iter().zip(&ffn).map(|(a, b)| a + b).collect();
        let (out, ffn_ln) = l.ffn_ln.forward(&resid, t, self.config.layer_norm_eps);
        (
            out,
            LayerCache {
                input: x,
                q,
                k,
                v,
                probs,
                ctx,
                attn_ln,
                mid,
                ffn_pre,
                ffn_act,
                ffn_ln,
            },
        )
    }

    /// Accumulate parameter gradients given `d_hidden = ∂L/∂(final states)`.
    pub fn backward(&mut self, cache: &SequenceCache, d_hidden: &[f32]) {
        let h = self.config.hidden_size;
        let t = cache.ids.len();
        let nh = self.config.num_heads;
        let mut d = d_hidden.to_vec();
        for (l, lc) in self.layers.iter_mut().zip(&cache.layers).rev() {
            d = layer_backward(l, lc, &d, t, h, nh);
        }
        let d_emb = self.emb_ln.backward(&cache.emb_ln, t, &d);
        let (_, dword) = self.word.parts();
        for (i, &id) in cache.ids.iter().enumerate() {
            let src = &d_emb[i * h..(i + 1) * h];
            let dst = &mut dword[id as usize * h..(id as usize + 1) * h];
            for j in 0..h {
                dst[j] += src[j];
            }
        }
        let (_, dpos) = self.position.parts();
        for i in 0..t {
            for j in 0..h {
                dpos[i * h + j] += d_emb[i * h + j];
            }
        }
        let (_, dtyp) = self.token_type.parts();
        for i in 0..t {
            for j in 0..h {
                dtyp[j] += d_emb[i * h + j];
            }
        }
    }
}

fn layer_backward(l: &mut Layer, c: &LayerCache, d_out: &[f32], t: usize, h: usize, nh: usize) -> Vec<f32> {
    let dh = h / nh;
    let scale = 1.0 / libm::sqrtf(dh as f32);

    let d_resid2 = l.ffn_ln.backward(&c.ffn_ln, t, d_out);
    let d_act = l.ffn_out.backward(&c.ffn_act, t, &d_resid2);
    let d_pre = kernels::gelu_backward(&c.ffn_pre, &d_act);
    let mut d_mid = l.ffn_in.backward(&c.mid, t, &d_pre);
    for (a, b) in d_mid.iter_mut().zip(&d_resid2) {
        *a += b;
    }

    let d_resid1 = l.attn_ln.backward(&c.attn_ln, t, &d_mid);
    let d_ctx = l.attn_out.backward(&c.ctx, t, &d_resid1);

    let mut dq = vec![0.0f32; t * h];
    let mut dk = vec![0.0f32; t * h];
    let mut dv = vec![0.0f32; t * h];
    let mut dp = vec![0.0f32; t];
    for head in 0..nh {
        let off = head * dh;
        for i in 0..t {
            let probs = &c.probs[(head * t + i) * t..(head * t + i + 1) * t];
            let dci = &d_ctx[i * h + off..i * h + off + dh];
            let mut weighted = 0.0f32;
            for j in 0..t {
                let vj = &c.v[j * h + off..j * h + off + dh];
                dp[j] = dci.iter().zip(vj).map(|(a, b)| a * b).sum();
                weighted += probs[j] * dp[j];
                let dvj = &mut dv[j * h + off..j * h + off + dh];
                for d in 0..dh {
                    dvj[d] += probs[j] * dci[d];
                }
            }
            for j in 0..t {
                let ds = probs[j] * (dp[j] - weighted) * scale;
                if ds == 0.0 {
                    continue;
                }
                for d in 0..dh {
                    dq[i * h + off + d] += ds * c.k[j * h + off + d];
                    dk[j * h + off + d] += ds * c.q[i * h + off + d];
                }
            }
        }
    }

    let mut d_in = d_resid1;
    for (lin, grad) in [(&mut l.query, &dq), (&mut l.key, &dk), (&mut l.value, &dv)] {
        let dx = lin.backward(&c.input, t, grad);
        for (a, b) in d_in.iter_mut().zip(&dx) {
            *a += b;
        }
    }
    d_in
}
