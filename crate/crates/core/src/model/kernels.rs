//! Dense row-major kernels with hand-written backward passes.
//!
//! Activations are `[rows × cols]` slices. Linear weights use the
//! `[out × in]` layout, so `y = x Wᵀ + b`.

use alloc::vec;
use alloc::vec::Vec;

/// Eight independent partial sums so the loop vectorizes.
#[inline]
fn dot(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f32; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    acc.iter().sum::<f32>() + tail
}

#[inline]
fn axpy(y: &mut [f32], alpha: f32, x: &[f32]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn linear(x: &[f32], rows: usize, d_in: usize, w: &[f32], b: &[f32], d_out: usize) -> Vec<f32> {
    debug_assert_eq!(x.len(), rows * d_in);
    debug_assert_eq!(w.len(), d_out * d_in);
    let mut y = vec![0.0f32; rows * d_out];
    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        let yr = &mut y[r * d_out..(r + 1) * d_out];
        for (o, yo) in yr.iter_mut().enumerate() {
            *yo = dot(xr, &w[o * d_in..(o + 1) * d_in]) + b[o];
        }
    }
    y
}

/// Accumulates `dW`, `db` and returns `dx`.
#[allow(clippy::too_many_arguments)]
pub fn linear_backward(
    x: &[f32],
    rows: usize,
    d_in: usize,
    w: &[f32],
    d_out: usize,
    dy: &[f32],
    dw: &mut [f32],
    db: &mut [f32],
) -> Vec<f32> {
    let mut dx = vec![0.0f32; rows * d_in];
    for r in 0..rows {
        let dyr = &dy[r * d_out..(r + 1) * d_out];
        let xr = &x[r * d_in..(r + 1) * d_in];
        let dxr = &mut dx[r * d_in..(r + 1) * d_in];
        for (o, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(dxr, g, &w[o * d_in..(o + 1) * d_in]);
            axpy(&mut dw[o * d_in..(o + 1) * d_in], g, xr);
            db[o] += g;
        }
    }
    dx
}

/// Normalized inputs and inverse deviations, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub xhat: Vec<f32>,
    pub rstd: Vec<f32>,
}

pub fn layer_norm(x: &[f32], rows: usize, dim: usize, gamma: &[f32], beta: &[f32], eps: f32) -> (Vec<f32>, LayerNormCache) {
    let mut y = vec![0.0f32; rows * dim];
    let mut xhat = vec![0.0f32; rows * dim];
    let mut rstd = vec![0.0f32; rows];
    for r in 0..rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let mean = xr.iter().sum::<f32>() / dim as f32;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / dim as f32;
        let rs = 1.0 / libm::sqrtf(var + eps);
        rstd[r] = rs;
        for i in 0..dim {
            let h = (xr[i] - mean) * rs;
            xhat[r * dim + i] = h;
            y[r * dim + i] = h * gamma[i] + beta[i];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

pub fn layer_norm_backward(
    cache: &LayerNormCache,
    rows: usize,
    dim: usize,
    gamma: &[f32],
    dy: &[f32],
    dgamma: &mut [f32],
    dbeta: &mut [f32],
) -> Vec<f32> {
    let mut dx = vec![0.0f32; rows * dim];
    let mut dxhat = vec![0.0f32; dim];
    for r in 0..rows {
        let xh = &cache.xhat[r * dim..(r + 1) * dim];
        let dyr = &dy[r * dim..(r + 1) * dim];
        let mut mean_d = 0.0f32;
        let mut mean_dx = 0.0f32;
        for i in 0..dim {
            dgamma[i] += dyr[i] * xh[i];
            dbeta[i] += dyr[i];
            dxhat[i] = dyr[i] * gamma[i];
            mean_d += dxhat[i];
            mean_dx += dxhat[i] * xh[i];
        }
        mean_d /= dim as f32;
        mean_dx /= dim as f32;
        let rs = cache.rstd[r];
        for i in 0..dim {
            dx[r * dim + i] = rs * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
    dx
}

const FRAC_1_SQRT_2: f32 = core::f32::consts::FRAC_1_SQRT_2;
// 1 / sqrt(2π)
const INV_SQRT_2PI: f32 = 0.398_942_3;

/// Exact (erf) GELU.
pub fn gelu(x: &[f32]) -> Vec<f32> {
    x.iter()
        .map(|&v| 0.5 * v * (1.0 + libm::erff(v * FRAC_1_SQRT_2)))
        .collect()
}

pub fn gelu_backward(x: &[f32], dy: &[f32]) -> Vec<f32> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| {
            let cdf = 0.5 * (1.0 + libm::erff(v * FRAC_1_SQRT_2));
            let pdf = INV_SQRT_2PI * libm::expf(-0.5 * v * v);
            g * (cdf + v * pdf)
        })
        .collect()
}

/// In-place numerically stable softmax over one row.
pub fn softmax_in_place(row: &mut [f32]) {
    let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in row.iter_mut() {
        *v = libm::expf(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
