//! Network building blocks with analytic forward and backward passes.
//!
//! Every layer owns its parameters, parameter gradients, and whatever it
//! must cache between forward and backward. Convolutions and dense layers
//! run on a small matrix-multiply kernel; convolution parallelizes across
//! the batch with per-sample gradient buffers summed in batch order, so
//! results never depend on thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tensor::Tensor4;
use super::NnError;

/// Train or inference behaviour for batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Row-major matrix multiply `c = a * b + beta * c` on f64 slices.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
    rsc: isize,
    csc: isize,
) {
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            rsc,
            csc,
        );
    }
}

/// 2-D convolution, stride 1, "same" zero padding for odd kernels.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `[out_channels x (in_channels * kernel * kernel)]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    cache_input: Option<Tensor4>,
}

impl Conv2d {
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let scale = (2.0 / fan_in as f64).sqrt();
        let weight = (0..out_channels * fan_in)
            .map(|_| standard_normal(rng) * scale)
            .collect();
        Self {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias: vec![0.0; out_channels],
            grad_weight: vec![0.0; out_channels * fan_in],
            grad_bias: vec![0.0; out_channels],
            cache_input: None,
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4, NnError> {
        if x.c != self.in_channels {
            return Err(NnError::Geometry(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, x.c
            )));
        }
        let (h, w) = (x.h, x.w);
        let pixels = h * w;
        let patch = self.patch_len();
        let mut out = Tensor4::zeros(x.n, self.out_channels, h, w);
        let in_len = x.sample_len();
        let out_len = out.sample_len();
        x.data
            .par_chunks(in_len)
            .zip(out.data.par_chunks_mut(out_len))
            .for_each_with(vec![0.0; patch * pixels], |cols, (xs, os)| {
                im2col(xs, self.in_channels, h, w, self.kernel, cols);
                gemm(
                    self.out_channels,
                    patch,
                    pixels,
                    &self.weight,
                    patch as isize,
                    1,
                    cols,
                    pixels as isize,
                    1,
                    0.0,
                    os,
                    pixels as isize,
                    1,
                );
                for (c, &b) in self.bias.iter().enumerate() {
                    for v in &mut os[c * pixels..(c + 1) * pixels] {
                        *v += b;
                    }
                }
            });
        self.cache_input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let x = self
            .cache_input
            .as_ref()
            .ok_or_else(|| NnError::Geometry("conv backward before forward".into()))?;
        let (h, w) = (x.h, x.w);
        let pixels = h * w;
        let patch = self.patch_len();
        let mut dx = Tensor4::zeros(x.n, x.c, h, w);
        let in_len = x.sample_len();
        let out_len = dout.sample_len();

        // Input gradients are per-sample independent.
        x.data
            .par_chunks(in_len)
            .zip(dout.data.par_chunks(out_len))
            .zip(dx.data.par_chunks_mut(in_len))
            .for_each_with(vec![0.0; patch * pixels], |dcols, ((_, douts), dxs)| {
                gemm(
                    patch,
                    self.out_channels,
                    pixels,
                    &self.weight,
                    1,
                    patch as isize,
                    douts,
                    pixels as isize,
                    1,
                    0.0,
                    dcols,
                    pixels as isize,
                    1,
                );
                col2im(dcols, self.in_channels, h, w, self.kernel, dxs);
            });

        // Parameter gradients: per-sample partials, summed in batch order.
        let partials: Vec<(Vec<f64>, Vec<f64>)> = x
            .data
            .par_chunks(in_len)
            .zip(dout.data.par_chunks(out_len))
            .map_with(vec![0.0; patch * pixels], |cols, (xs, douts)| {
                im2col(xs, self.in_channels, h, w, self.kernel, cols);
                let mut dw = vec![0.0; self.weight.len()];
                gemm(
                    self.out_channels,
                    pixels,
                    patch,
                    douts,
                    pixels as isize,
                    1,
                    cols,
                    1,
                    pixels as isize,
                    0.0,
                    &mut dw,
                    patch as isize,
                    1,
                );
                let db: Vec<f64> = (0..self.out_channels)
                    .map(|c| douts[c * pixels..(c + 1) * pixels].iter().sum())
                    .collect();
                (dw, db)
            })
            .collect();
        self.grad_weight.iter_mut().for_each(|g| *g = 0.0);
        self.grad_bias.iter_mut().for_each(|g| *g = 0.0);
        for (dw, db) in partials {
            for (g, v) in self.grad_weight.iter_mut().zip(dw) {
                *g += v;
            }
            for (g, v) in self.grad_bias.iter_mut().zip(db) {
                *g += v;
            }
        }
        Ok(dx)
    }
}

/// Unfold one sample into patch columns: rows are (channel, ky, kx), columns
/// are output pixels, zero padding outside the input.
fn im2col(x: &[f64], channels: usize, h: usize, w: usize, kernel: usize, cols: &mut [f64]) {
    let pad = kernel / 2;
    let pixels = h * w;
    let mut row = 0;
    for c in 0..channels {
        let plane = &x[c * pixels..(c + 1) * pixels];
        for ky in 0..kernel {
            for kx in 0..kernel {
                let out_row = &mut cols[row * pixels..(row + 1) * pixels];
                row += 1;
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - pad as isize;
                    let dst = &mut out_row[oy * w..(oy + 1) * w];
                    if iy < 0 || iy >= h as isize {
                        dst.iter_mut().for_each(|v| *v = 0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, slot) in dst.iter_mut().enumerate() {
                        let ix = ox as isize + kx as isize - pad as isize;
                        *slot = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Fold patch-column gradients back onto the input (adjoint of [`im2col`]).
fn col2im(cols: &[f64], channels: usize, h: usize, w: usize, kernel: usize, dx: &mut [f64]) {
    let pad = kernel / 2;
    let pixels = h * w;
    dx.iter_mut().for_each(|v| *v = 0.0);
    let mut row = 0;
    for c in 0..channels {
        for ky in 0..kernel {
            for kx in 0..kernel {
                let src_row = &cols[row * pixels..(row + 1) * pixels];
                row += 1;
                for oy in 0..h {
                    let iy = oy as isize + ky as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut dx[c * pixels + iy as usize * w..c * pixels + (iy as usize + 1) * w];
                    let src = &src_row[oy * w..(oy + 1) * w];
                    for (ox, &v) in src.iter().enumerate() {
                        let ix = ox as isize + kx as isize - pad as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
}

/// Per-channel batch normalization over `(batch, height, width)`.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub channels: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: Tensor4,
    inv_std: Vec<f64>,
}

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            grad_gamma: vec![0.0; channels],
            grad_beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    #[allow(clippy::needless_range_loop)] // indexed math over parallel per-channel arrays
    pub fn forward(&mut self, x: &Tensor4, mode: Mode) -> Result<Tensor4, NnError> {
        if x.c != self.channels {
            return Err(NnError::Geometry(format!(
                "batch norm expects {} channels, got {}",
                self.channels, x.c
            )));
        }
        let mut out = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let plane = x.h * x.w;
        let count = (x.n * plane) as f64;
        match mode {
            Mode::Train => {
                let mut x_hat = Tensor4::zeros(x.n, x.c, x.h, x.w);
                let mut inv_std = vec![0.0; self.channels];
                for c in 0..self.channels {
                    let mut sum = 0.0;
                    for n in 0..x.n {
                        let base = (n * x.c + c) * plane;
                        sum += x.data[base..base + plane].iter().sum::<f64>();
                    }
                    let mean = sum / count;
                    let mut var_sum = 0.0;
                    for n in 0..x.n {
                        let base = (n * x.c + c) * plane;
                        for &v in &x.data[base..base + plane] {
                            let d = v - mean;
                            var_sum += d * d;
                        }
                    }
                    let var = var_sum / count; // biased, as used for normalization
                    let istd = 1.0 / (var + BN_EPS).sqrt();
                    inv_std[c] = istd;
                    for n in 0..x.n {
                        let base = (n * x.c + c) * plane;
                        for i in base..base + plane {
                            let xh = (x.data[i] - mean) * istd;
                            x_hat.data[i] = xh;
                            out.data[i] = self.gamma[c] * xh + self.beta[c];
                        }
                    }
                    self.running_mean[c] = (1.0 - BN_MOMENTUM) * self.running_mean[c] + BN_MOMENTUM * mean;
                    self.running_var[c] = (1.0 - BN_MOMENTUM) * self.running_var[c] + BN_MOMENTUM * var;
                }
                self.cache = Some(BnCache { x_hat, inv_std });
            }
            Mode::Infer => {
                for c in 0..self.channels {
                    let istd = 1.0 / (self.running_var[c] + BN_EPS).sqrt();
                    let (mean, gamma, beta) = (self.running_mean[c], self.gamma[c], self.beta[c]);
                    for n in 0..x.n {
                        let base = (n * x.c + c) * plane;
                        for i in base..base + plane {
                            out.data[i] = gamma * (x.data[i] - mean) * istd + beta;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| NnError::Geometry("batch norm backward before train-mode forward".into()))?;
        let x_hat = &cache.x_hat;
        let plane = dout.h * dout.w;
        let count = (dout.n * plane) as f64;
        let mut dx = Tensor4::zeros(dout.n, dout.c, dout.h, dout.w);
        for c in 0..self.channels {
            let mut sum_dy = 0.0;
            let mut sum_dy_xhat = 0.0;
            for n in 0..dout.n {
                let base = (n * dout.c + c) * plane;
                for i in base..base + plane {
                    sum_dy += dout.data[i];
                    sum_dy_xhat += dout.data[i] * x_hat.data[i];
                }
            }
            self.grad_gamma[c] = sum_dy_xhat;
            self.grad_beta[c] = sum_dy;
            let scale = self.gamma[c] * cache.inv_std[c];
            for n in 0..dout.n {
                let base = (n * dout.c + c) * plane;
                for i in base..base + plane {
                    dx.data[i] = scale
                        * (dout.data[i] - sum_dy / count - x_hat.data[i] * sum_dy_xhat / count);
                }
            }
        }
        Ok(dx)
    }
}

/// Rectifier. Gradient passes where the input was `>= 0`.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn forward(&mut self, x: &Tensor4) -> Tensor4 {
        let mask: Vec<bool> = x.data.iter().map(|&v| v >= 0.0).collect();
        let mut out = x.clone();
        for (v, &pass) in out.data.iter_mut().zip(&mask) {
            if !pass {
                *v = 0.0;
            }
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let mask = self
            .mask
            .as_ref()
            .ok_or_else(|| NnError::Geometry("relu backward before forward".into()))?;
        let mut dx = dout.clone();
        for (v, &pass) in dx.data.iter_mut().zip(mask) {
            if !pass {
                *v = 0.0;
            }
        }
        Ok(dx)
    }
}

/// 2x2 stride-2 max pool. Output dims floor; ties keep the first occurrence
/// in row-major window scan order, and backward routes each output gradient
/// to exactly that position.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    argmax: Option<(Vec<usize>, usize, usize, usize, usize)>, // indices + input dims
}

impl MaxPool2 {
    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4, NnError> {
        let (oh, ow) = (x.h / 2, x.w / 2);
        if oh == 0 || ow == 0 {
            return Err(NnError::Geometry(format!(
                "max pool needs at least 2x2 input, got {}x{}",
                x.h, x.w
            )));
        }
        let mut out = Tensor4::zeros(x.n, x.c, oh, ow);
        let mut argmax = vec![0usize; out.data.len()];
        let mut o = 0;
        for n in 0..x.n {
            for c in 0..x.c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_idx = 0;
                        for ky in 0..2 {
                            for kx in 0..2 {
                                let idx =
                                    ((n * x.c + c) * x.h + oy * 2 + ky) * x.w + ox * 2 + kx;
                                if x.data[idx] > best {
                                    best = x.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.data[o] = best;
                        argmax[o] = best_idx;
                        o += 1;
                    }
                }
            }
        }
        self.argmax = Some((argmax, x.n, x.c, x.h, x.w));
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let (argmax, n, c, h, w) = self
            .argmax
            .as_ref()
            .ok_or_else(|| NnError::Geometry("max pool backward before forward".into()))?;
        let mut dx = Tensor4::zeros(*n, *c, *h, *w);
        for (&idx, &g) in argmax.iter().zip(&dout.data) {
            dx.data[idx] += g;
        }
        Ok(dx)
    }
}

/// 2x2 stride-2 average pool.
#[derive(Debug, Clone, Default)]
pub struct AvgPool2 {
    in_dims: Option<(usize, usize, usize, usize)>,
}

impl AvgPool2 {
    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4, NnError> {
        let (oh, ow) = (x.h / 2, x.w / 2);
        if oh == 0 || ow == 0 {
            return Err(NnError::Geometry(format!(
                "avg pool needs at least 2x2 input, got {}x{}",
                x.h, x.w
            )));
        }
        let mut out = Tensor4::zeros(x.n, x.c, oh, ow);
        let mut o = 0;
        for n in 0..x.n {
            for c in 0..x.c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut sum = 0.0;
                        for ky in 0..2 {
                            for kx in 0..2 {
                                sum += x.at(n, c, oy * 2 + ky, ox * 2 + kx);
                            }
                        }
                        out.data[o] = sum / 4.0;
                        o += 1;
                    }
                }
            }
        }
        self.in_dims = Some(x.dims());
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let (n, c, h, w) = self
            .in_dims
            .ok_or_else(|| NnError::Geometry("avg pool backward before forward".into()))?;
        let mut dx = Tensor4::zeros(n, c, h, w);
        let (oh, ow) = (dout.h, dout.w);
        for ni in 0..n {
            for ci in 0..c {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = dout.at(ni, ci, oy, ox) / 4.0;
                        for ky in 0..2 {
                            for kx in 0..2 {
                                *dx.at_mut(ni, ci, oy * 2 + ky, ox * 2 + kx) += g;
                            }
                        }
                    }
                }
            }
        }
        Ok(dx)
    }
}

/// Inverted dropout: surviving activations scale by `1 / (1 - rate)` during
/// training; inference is the identity.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    /// When set, used instead of sampling; lets tests pin the mask.
    pub fixed_mask: Option<Vec<f64>>,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Self {
            rate,
            fixed_mask: None,
            mask: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor4, mode: Mode, rng: &mut ChaCha8Rng) -> Tensor4 {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 - self.rate;
        let mask: Vec<f64> = match &self.fixed_mask {
            Some(m) => m.clone(),
            None => x
                .data
                .iter()
                .map(|_| {
                    if rng.random::<f64>() < self.rate {
                        0.0
                    } else {
                        1.0 / keep
                    }
                })
                .collect(),
        };
        let mut out = x.clone();
        for (v, &m) in out.data.iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        match &self.mask {
            None => Ok(dout.clone()),
            Some(mask) => {
                let mut dx = dout.clone();
                for (v, &m) in dx.data.iter_mut().zip(mask) {
                    *v *= m;
                }
                Ok(dx)
            }
        }
    }
}

/// Fully connected head: flattens each sample and applies `W x + b`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim x in_dim]`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    cache_input: Option<Tensor4>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (2.0 / in_dim as f64).sqrt();
        let weight = (0..out_dim * in_dim)
            .map(|_| standard_normal(rng) * scale)
            .collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias: vec![0.0; out_dim],
            grad_weight: vec![0.0; out_dim * in_dim],
            grad_bias: vec![0.0; out_dim],
            cache_input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor4) -> Result<Tensor4, NnError> {
        if x.sample_len() != self.in_dim {
            return Err(NnError::Geometry(format!(
                "dense expects {} inputs per sample, got {}",
                self.in_dim,
                x.sample_len()
            )));
        }
        let mut out = Tensor4::zeros(x.n, self.out_dim, 1, 1);
        // out (n x out) = x (n x in) * W^T (in x out)
        gemm(
            x.n,
            self.in_dim,
            self.out_dim,
            &x.data,
            self.in_dim as isize,
            1,
            &self.weight,
            1,
            self.in_dim as isize,
            0.0,
            &mut out.data,
            self.out_dim as isize,
            1,
        );
        for n in 0..x.n {
            for (o, &b) in self.bias.iter().enumerate() {
                out.data[n * self.out_dim + o] += b;
            }
        }
        self.cache_input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        let x = self
            .cache_input
            .as_ref()
            .ok_or_else(|| NnError::Geometry("dense backward before forward".into()))?;
        // dW (out x in) = dout^T (out x n) * x (n x in)
        gemm(
            self.out_dim,
            x.n,
            self.in_dim,
            &dout.data,
            1,
            self.out_dim as isize,
            &x.data,
            self.in_dim as isize,
            1,
            0.0,
            &mut self.grad_weight,
            self.in_dim as isize,
            1,
        );
        for o in 0..self.out_dim {
            self.grad_bias[o] = (0..x.n).map(|n| dout.data[n * self.out_dim + o]).sum();
        }
        // dx (n x in) = dout (n x out) * W (out x in)
        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        gemm(
            x.n,
            self.out_dim,
            self.in_dim,
            &dout.data,
            self.out_dim as isize,
            1,
            &self.weight,
            self.in_dim as isize,
            1,
            0.0,
            &mut dx.data,
            self.in_dim as isize,
            1,
        );
        Ok(dx)
    }
}

/// Box-Muller standard normal from the seeded stream.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

/// One network stage; the order of variants fixes nothing, the network's
/// layer list does.
#[derive(Debug, Clone)]
pub enum LayerOp {
    Conv(Conv2d),
    BatchNorm(BatchNorm2d),
    Relu(Relu),
    MaxPool(MaxPool2),
    AvgPool(AvgPool2),
    Dropout(Dropout),
    Dense(Dense),
}

impl LayerOp {
    pub fn forward(&mut self, x: &Tensor4, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor4, NnError> {
        match self {
            LayerOp::Conv(l) => l.forward(x),
            LayerOp::BatchNorm(l) => l.forward(x, mode),
            LayerOp::Relu(l) => Ok(l.forward(x)),
            LayerOp::MaxPool(l) => l.forward(x),
            LayerOp::AvgPool(l) => l.forward(x),
            LayerOp::Dropout(l) => Ok(l.forward(x, mode, rng)),
            LayerOp::Dense(l) => l.forward(x),
        }
    }

    pub fn backward(&mut self, dout: &Tensor4) -> Result<Tensor4, NnError> {
        match self {
            LayerOp::Conv(l) => l.backward(dout),
            LayerOp::BatchNorm(l) => l.backward(dout),
            LayerOp::Relu(l) => l.backward(dout),
            LayerOp::MaxPool(l) => l.backward(dout),
            LayerOp::AvgPool(l) => l.backward(dout),
            LayerOp::Dropout(l) => l.backward(dout),
            LayerOp::Dense(l) => l.backward(dout),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LayerOp::Conv(_) => "conv",
            LayerOp::BatchNorm(_) => "batch_norm",
            LayerOp::Relu(_) => "relu",
            LayerOp::MaxPool(_) => "max_pool",
            LayerOp::AvgPool(_) => "avg_pool",
            LayerOp::Dropout(_) => "dropout",
            LayerOp::Dense(_) => "dense",
        }
    }

    /// Learnable parameters with their gradients; `true` marks tensors that
    /// L2 regularization touches (conv and dense weights only).
    pub fn learnables(&mut self) -> Vec<(&mut Vec<f64>, &mut Vec<f64>, bool)> {
        match self {
            LayerOp::Conv(l) => vec![
                (&mut l.weight, &mut l.grad_weight, true),
                (&mut l.bias, &mut l.grad_bias, false),
            ],
            LayerOp::BatchNorm(l) => vec![
                (&mut l.gamma, &mut l.grad_gamma, false),
                (&mut l.beta, &mut l.grad_beta, false),
            ],
            LayerOp::Dense(l) => vec![
                (&mut l.weight, &mut l.grad_weight, true),
                (&mut l.bias, &mut l.grad_bias, false),
            ],
            _ => Vec::new(),
        }
    }

    /// Every persisted tensor, in declaration order: learnables plus batch
    /// norm running statistics.
    pub fn state_tensors(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            LayerOp::Conv(l) => vec![&mut l.weight, &mut l.bias],
            LayerOp::BatchNorm(l) => vec![
                &mut l.gamma,
                &mut l.beta,
                &mut l.running_mean,
                &mut l.running_var,
            ],
            LayerOp::Dense(l) => vec![&mut l.weight, &mut l.bias],
            _ => Vec::new(),
        }
    }

    /// Read-only view of [`Self::state_tensors`], same order.
    pub fn state_tensors_ref(&self) -> Vec<&Vec<f64>> {
        match self {
            LayerOp::Conv(l) => vec![&l.weight, &l.bias],
            LayerOp::BatchNorm(l) => vec![&l.gamma, &l.beta, &l.running_mean, &l.running_var],
            LayerOp::Dense(l) => vec![&l.weight, &l.bias],
            _ => Vec::new(),
        }
    }
}
