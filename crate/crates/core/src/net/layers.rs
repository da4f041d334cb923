//! Layers with hand-written backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`, so a
//! `backward` call always refers to the most recent `forward`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    ConvTranspose,
    BatchNorm,
    LeakyRelu,
    Relu,
    Dropout,
    Sigmoid,
    Softmax,
    GlobalAvgPool,
}

/// Named trainable tensor; its gradient lives in the tensor's grad slot.
#[derive(Debug, Clone)]
pub struct Param<T: Scalar> {
    pub name: String,
    pub value: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let mut value = value;
        value.grad_mut();
        Self { name: name.into(), value }
    }

    fn grad(&mut self) -> &mut [T] {
        self.value.grad_mut()
    }
}

pub trait Layer<T: Scalar>: Send {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T>;
    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T>;
    fn kind(&self) -> LayerKind;

    fn params(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    /// Non-trainable state that must survive a checkpoint (running statistics).
    fn buffers(&mut self) -> Vec<(String, &mut Vec<T>)> {
        Vec::new()
    }

    /// Re-seeds stochastic layers; no-op elsewhere.
    fn reseed(&mut self, _seed: u64) {}
}

fn normal_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, mean: f64, std: f64) -> Vec<T> {
    let dist = Normal::new(mean, std).expect("valid normal");
    (0..n).map(|_| T::from_f64(dist.sample(rng))).collect()
}

#[allow(clippy::too_many_arguments)]
fn im2col<T: Scalar>(
    img: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    ho: usize,
    wo: usize,
    col: &mut [T],
) {
    let plane = ho * wo;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let dst = &mut col[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = (oy * s + ky) as isize - p as isize;
                    let drow = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        drow.iter_mut().for_each(|v| *v = T::zero());
                        continue;
                    }
                    let src = &img[(ch * h + iy as usize) * w..(ch * h + iy as usize + 1) * w];
                    for (ox, d) in drow.iter_mut().enumerate() {
                        let ix = (ox * s + kx) as isize - p as isize;
                        *d = if ix < 0 || ix >= w as isize { T::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]; accumulates into `img`.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Scalar>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    s: usize,
    p: usize,
    ho: usize,
    wo: usize,
    img: &mut [T],
) {
    let plane = ho * wo;
    for ch in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let row = (ch * k + ky) * k + kx;
                let srcp = &col[row * plane..(row + 1) * plane];
                for oy in 0..ho {
                    let iy = (oy * s + ky) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst = &mut img[(ch * h + iy as usize) * w..(ch * h + iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * s + kx) as isize - p as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[ix as usize] += srcp[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(y: &mut [T], bias: &[T], plane: usize) {
    for (c, chunk) in y.chunks_exact_mut(plane).enumerate() {
        let b = bias[c % bias.len()];
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn bias_grad<T: Scalar>(dy: &[T], db: &mut [T], plane: usize) {
    let c = db.len();
    for (i, chunk) in dy.chunks_exact(plane).enumerate() {
        db[i % c] += chunk.iter().copied().sum::<T>();
    }
}

/// 2-d convolution, weights `(out, in, k, k)`.
pub struct Conv2d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    cols: Vec<T>,
    in_shape: (usize, usize, usize, usize),
    out_hw: (usize, usize),
}

impl<T: Scalar> Conv2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let w = normal_vec(rng, out_c * in_c * k * k, 0.0, 0.02);
        Self {
            weight: Param::new(format!("{name}.weight"), Tensor::from_vec(vec![out_c, in_c, k, k], w)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_c])),
            in_c,
            out_c,
            k,
            stride,
            pad,
            cols: Vec::new(),
            in_shape: (0, 0, 0, 0),
            out_hw: (0, 0),
        }
    }

    /// The `k = 4`, stride 2, padding 1 convolution used throughout both nets.
    pub fn down(name: &str, in_c: usize, out_c: usize, rng: &mut ChaCha8Rng) -> Self {
        Self::new(name, in_c, out_c, 4, 2, 1, rng)
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn out_channels(&self) -> usize {
        self.out_c
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        let (n, c, h, w) = x.dims4();
        assert_eq!(c, self.in_c, "conv input channels");
        let ho = (h + 2 * self.pad - self.k) / self.stride + 1;
        let wo = (w + 2 * self.pad - self.k) / self.stride + 1;
        let ck = c * self.k * self.k;
        let plane = ho * wo;
        self.cols.resize(n * ck * plane, T::zero());
        let mut y = vec![T::zero(); n * self.out_c * plane];
        for i in 0..n {
            let col = &mut self.cols[i * ck * plane..(i + 1) * ck * plane];
            im2col(&x.data()[i * c * h * w..(i + 1) * c * h * w], c, h, w, self.k, self.stride, self.pad, ho, wo, col);
            let yi = &mut y[i * self.out_c * plane..(i + 1) * self.out_c * plane];
            T::gemm(self.out_c, ck, plane, self.weight.value.data(), false, col, false, yi, false);
        }
        add_bias(&mut y, self.bias.value.data(), plane);
        self.in_shape = (n, c, h, w);
        self.out_hw = (ho, wo);
        Tensor::from_vec(vec![n, self.out_c, ho, wo], y)
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = self.in_shape;
        let (ho, wo) = self.out_hw;
        let plane = ho * wo;
        let ck = c * self.k * self.k;
        let mut dx = vec![T::zero(); n * c * h * w];
        let mut dcol = vec![T::zero(); ck * plane];
        bias_grad(dy.data(), self.bias.grad(), plane);
        for i in 0..n {
            let dyi = &dy.data()[i * self.out_c * plane..(i + 1) * self.out_c * plane];
            let col = &self.cols[i * ck * plane..(i + 1) * ck * plane];
            T::gemm(self.out_c, plane, ck, dyi, false, col, true, self.weight.value.grad_mut(), true);
            T::gemm(ck, self.out_c, plane, self.weight.value.data(), true, dyi, false, &mut dcol, false);
            col2im(&dcol, c, h, w, self.k, self.stride, self.pad, ho, wo, &mut dx[i * c * h * w..(i + 1) * c * h * w]);
        }
        Tensor::from_vec(vec![n, c, h, w], dx)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Conv
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Fractionally-strided convolution, weights `(in, out, k, k)`; with
/// `k = 4, stride 2, pad 1` it doubles the spatial size.
pub struct ConvTranspose2d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_c: usize,
    out_c: usize,
    k: usize,
    stride: usize,
    pad: usize,
    input: Tensor<T>,
    out_hw: (usize, usize),
}

impl<T: Scalar> ConvTranspose2d<T> {
    pub fn up(name: &str, in_c: usize, out_c: usize, rng: &mut ChaCha8Rng) -> Self {
        let (k, stride, pad) = (4, 2, 1);
        let w = normal_vec(rng, in_c * out_c * k * k, 0.0, 0.02);
        Self {
            weight: Param::new(format!("{name}.weight"), Tensor::from_vec(vec![in_c, out_c, k, k], w)),
            bias: Param::new(format!("{name}.bias"), Tensor::zeros(vec![out_c])),
            in_c,
            out_c,
            k,
            stride,
            pad,
            input: Tensor::zeros(vec![0]),
            out_hw: (0, 0),
        }
    }
}

impl<T: Scalar> Layer<T> for ConvTranspose2d<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        let (n, c, h, w) = x.dims4();
        assert_eq!(c, self.in_c, "conv-transpose input channels");
        let ho = (h - 1) * self.stride + self.k - 2 * self.pad;
        let wo = (w - 1) * self.stride + self.k - 2 * self.pad;
        let okk = self.out_c * self.k * self.k;
        let mut col = vec![T::zero(); okk * h * w];
        let mut y = vec![T::zero(); n * self.out_c * ho * wo];
        for i in 0..n {
            let xi = &x.data()[i * c * h * w..(i + 1) * c * h * w];
            T::gemm(okk, c, h * w, self.weight.value.data(), true, xi, false, &mut col, false);
            let yi = &mut y[i * self.out_c * ho * wo..(i + 1) * self.out_c * ho * wo];
            col2im(&col, self.out_c, ho, wo, self.k, self.stride, self.pad, h, w, yi);
        }
        add_bias(&mut y, self.bias.value.data(), ho * wo);
        self.input = x.clone();
        self.out_hw = (ho, wo);
        Tensor::from_vec(vec![n, self.out_c, ho, wo], y)
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = self.input.dims4();
        let (ho, wo) = self.out_hw;
        let okk = self.out_c * self.k * self.k;
        let mut dcol = vec![T::zero(); okk * h * w];
        let mut dx = vec![T::zero(); n * c * h * w];
        bias_grad(dy.data(), self.bias.grad(), ho * wo);
        for i in 0..n {
            let dyi = &dy.data()[i * self.out_c * ho * wo..(i + 1) * self.out_c * ho * wo];
            im2col(dyi, self.out_c, ho, wo, self.k, self.stride, self.pad, h, w, &mut dcol);
            let xi = &self.input.data()[i * c * h * w..(i + 1) * c * h * w];
            T::gemm(c, h * w, okk, xi, false, &dcol, true, self.weight.value.grad_mut(), true);
            T::gemm(c, okk, h * w, self.weight.value.data(), false, &dcol, false, &mut dx[i * c * h * w..(i + 1) * c * h * w], false);
        }
        Tensor::from_vec(vec![n, c, h, w], dx)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::ConvTranspose
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Per-channel batch normalization. Training uses batch statistics and
/// updates running averages (momentum 0.1); evaluation uses the averages.
pub struct BatchNorm2d<T: Scalar> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    name: String,
    momentum: f64,
    eps: f64,
    xhat: Vec<T>,
    inv_std: Vec<T>,
    shape: (usize, usize, usize, usize),
    last_mode: Mode,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(name: &str, c: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            gamma: Param::new(format!("{name}.gamma"), Tensor::from_vec(vec![c], normal_vec(rng, c, 1.0, 0.02))),
            beta: Param::new(format!("{name}.beta"), Tensor::zeros(vec![c])),
            running_mean: vec![T::zero(); c],
            running_var: vec![T::one(); c],
            name: name.to_string(),
            momentum: 0.1,
            eps: 1e-5,
            xhat: Vec::new(),
            inv_std: Vec::new(),
            shape: (0, 0, 0, 0),
            last_mode: Mode::Train,
        }
    }
}

impl<T: Scalar> Layer<T> for BatchNorm2d<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let (n, c, h, w) = x.dims4();
        let plane = h * w;
        let m = (n * plane) as f64;
        let xd = x.data();
        let mut mean = vec![0.0f64; c];
        let mut var = vec![0.0f64; c];
        match mode {
            Mode::Train => {
                for i in 0..n {
                    for ch in 0..c {
                        let s = &xd[(i * c + ch) * plane..(i * c + ch + 1) * plane];
                        mean[ch] += s.iter().map(|v| v.as_f64()).sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m);
                for i in 0..n {
                    for ch in 0..c {
                        let s = &xd[(i * c + ch) * plane..(i * c + ch + 1) * plane];
                        var[ch] += s.iter().map(|v| (v.as_f64() - mean[ch]).powi(2)).sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= m);
                let unbias = if m > 1.0 { m / (m - 1.0) } else { 1.0 };
                for ch in 0..c {
                    let rm = self.running_mean[ch].as_f64();
                    let rv = self.running_var[ch].as_f64();
                    self.running_mean[ch] = T::from_f64((1.0 - self.momentum) * rm + self.momentum * mean[ch]);
                    self.running_var[ch] = T::from_f64((1.0 - self.momentum) * rv + self.momentum * var[ch] * unbias);
                }
            }
            Mode::Eval => {
                for ch in 0..c {
                    mean[ch] = self.running_mean[ch].as_f64();
                    var[ch] = self.running_var[ch].as_f64();
                }
            }
        }
        self.inv_std = var.iter().map(|v| T::from_f64(1.0 / (v + self.eps).sqrt())).collect();
        self.xhat.resize(xd.len(), T::zero());
        let mut y = vec![T::zero(); xd.len()];
        let (g, b) = (self.gamma.value.data(), self.beta.value.data());
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * plane;
                let mu = T::from_f64(mean[ch]);
                for j in off..off + plane {
                    let xh = (xd[j] - mu) * self.inv_std[ch];
                    self.xhat[j] = xh;
                    y[j] = g[ch] * xh + b[ch];
                }
            }
        }
        self.shape = (n, c, h, w);
        self.last_mode = mode;
        Tensor::from_vec(vec![n, c, h, w], y)
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = self.shape;
        let plane = h * w;
        let m = T::from_f64((n * plane) as f64);
        let dyd = dy.data();
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * plane;
                for j in off..off + plane {
                    sum_dy[ch] += dyd[j];
                    sum_dy_xhat[ch] += dyd[j] * self.xhat[j];
                }
            }
        }
        {
            let gg = self.gamma.grad();
            for ch in 0..c {
                gg[ch] += sum_dy_xhat[ch];
            }
        }
        {
            let gb = self.beta.grad();
            for ch in 0..c {
                gb[ch] += sum_dy[ch];
            }
        }
        let g = self.gamma.value.data();
        let mut dx = vec![T::zero(); dyd.len()];
        for i in 0..n {
            for ch in 0..c {
                let off = (i * c + ch) * plane;
                let scale = g[ch] * self.inv_std[ch];
                for j in off..off + plane {
                    dx[j] = match self.last_mode {
                        Mode::Train => {
                            scale * (dyd[j] - sum_dy[ch] / m - self.xhat[j] * sum_dy_xhat[ch] / m)
                        }
                        Mode::Eval => scale * dyd[j],
                    };
                }
            }
        }
        Tensor::from_vec(vec![n, c, h, w], dx)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::BatchNorm
    }

    fn params(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    fn buffers(&mut self) -> Vec<(String, &mut Vec<T>)> {
        vec![
            (format!("{}.running_mean", self.name), &mut self.running_mean),
            (format!("{}.running_var", self.name), &mut self.running_var),
        ]
    }
}

pub struct LeakyRelu<T: Scalar> {
    slope: T,
    input: Vec<T>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: f64) -> Self {
        Self { slope: T::from_f64(slope), input: Vec::new() }
    }
}

impl<T: Scalar> Layer<T> for LeakyRelu<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        self.input = x.data().to_vec();
        x.map(|v| if v > T::zero() { v } else { v * self.slope })
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let d = dy
            .data()
            .iter()
            .zip(&self.input)
            .map(|(&g, &x)| if x > T::zero() { g } else { g * self.slope })
            .collect();
        Tensor::from_vec(dy.shape().to_vec(), d)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::LeakyRelu
    }
}

#[derive(Default)]
pub struct Relu<T: Scalar> {
    input: Vec<T>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { input: Vec::new() }
    }
}

impl<T: Scalar> Layer<T> for Relu<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        self.input = x.data().to_vec();
        x.map(|v| v.max(T::zero()))
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let d = dy
            .data()
            .iter()
            .zip(&self.input)
            .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
            .collect();
        Tensor::from_vec(dy.shape().to_vec(), d)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Relu
    }
}

/// Inverted dropout; identity in evaluation mode.
pub struct Dropout<T: Scalar> {
    rate: f64,
    rng: ChaCha8Rng,
    mask: Vec<T>,
}

impl<T: Scalar> Dropout<T> {
    pub fn new(rate: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        Self { rate, rng: ChaCha8Rng::seed_from_u64(seed), mask: Vec::new() }
    }
}

impl<T: Scalar> Layer<T> for Dropout<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        match mode {
            Mode::Eval => {
                self.mask = vec![T::one(); x.len()];
                x.clone()
            }
            Mode::Train => {
                let keep = T::from_f64(1.0 / (1.0 - self.rate));
                let rate = self.rate;
                self.mask = (0..x.len())
                    .map(|_| if self.rng.random::<f64>() < rate { T::zero() } else { keep })
                    .collect();
                let d = x.data().iter().zip(&self.mask).map(|(&v, &m)| v * m).collect();
                Tensor::from_vec(x.shape().to_vec(), d)
            }
        }
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let d = dy.data().iter().zip(&self.mask).map(|(&g, &m)| g * m).collect();
        Tensor::from_vec(dy.shape().to_vec(), d)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Dropout
    }

    fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }
}

#[derive(Default)]
pub struct Sigmoid<T: Scalar> {
    out: Vec<T>,
}

impl<T: Scalar> Sigmoid<T> {
    pub fn new() -> Self {
        Self { out: Vec::new() }
    }
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Scalar> Layer<T> for Sigmoid<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        let y = x.map(sigmoid);
        self.out = y.data().to_vec();
        y
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let d = dy.data().iter().zip(&self.out).map(|(&g, &y)| g * y * (T::one() - y)).collect();
        Tensor::from_vec(dy.shape().to_vec(), d)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Sigmoid
    }
}

/// Softmax over the channel axis of an NCHW tensor.
#[derive(Default)]
pub struct Softmax<T: Scalar> {
    out: Tensor<T>,
}

impl<T: Scalar> Softmax<T> {
    pub fn new() -> Self {
        Self { out: Tensor::default() }
    }

    pub fn output(&self) -> &Tensor<T> {
        &self.out
    }
}

pub fn softmax_channels<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let plane = h * w;
    let xd = x.data();
    let mut y = vec![T::zero(); xd.len()];
    for i in 0..n {
        let base = i * c * plane;
        for p in 0..plane {
            let mut mx = T::neg_infinity();
            for ch in 0..c {
                mx = mx.max(xd[base + ch * plane + p]);
            }
            let mut sum = T::zero();
            for ch in 0..c {
                let e = (xd[base + ch * plane + p] - mx).exp();
                y[base + ch * plane + p] = e;
                sum += e;
            }
            for ch in 0..c {
                y[base + ch * plane + p] = y[base + ch * plane + p] / sum;
            }
        }
    }
    Tensor::from_vec(x.shape().to_vec(), y)
}

/// Vector-Jacobian product of the channel softmax given its output `y`.
pub fn softmax_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = y.dims4();
    let plane = h * w;
    let (yd, gd) = (y.data(), dy.data());
    let mut dx = vec![T::zero(); yd.len()];
    for i in 0..n {
        let base = i * c * plane;
        for p in 0..plane {
            let mut dot = T::zero();
            for ch in 0..c {
                dot += gd[base + ch * plane + p] * yd[base + ch * plane + p];
            }
            for ch in 0..c {
                let j = base + ch * plane + p;
                dx[j] = yd[j] * (gd[j] - dot);
            }
        }
    }
    Tensor::from_vec(y.shape().to_vec(), dx)
}

impl<T: Scalar> Layer<T> for Softmax<T> {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        self.out = softmax_channels(x);
        self.out.clone()
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        softmax_backward(&self.out, dy)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::Softmax
    }
}

/// Mean over the spatial axes: `(N, C, H, W) → (N, C)`.
#[derive(Default)]
pub struct GlobalAvgPool {
    shape: (usize, usize, usize, usize),
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Layer<T> for GlobalAvgPool {
    fn forward(&mut self, x: &Tensor<T>, _mode: Mode) -> Tensor<T> {
        let (n, c, h, w) = x.dims4();
        self.shape = (n, c, h, w);
        let plane = h * w;
        let inv = T::from_f64(1.0 / plane as f64);
        let y = x.data().chunks_exact(plane).map(|s| s.iter().copied().sum::<T>() * inv).collect();
        Tensor::from_vec(vec![n, c], y)
    }

    fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = self.shape;
        let plane = h * w;
        let inv = T::from_f64(1.0 / plane as f64);
        let mut dx = Vec::with_capacity(n * c * plane);
        for &g in dy.data() {
            dx.extend(std::iter::repeat_n(g * inv, plane));
        }
        Tensor::from_vec(vec![n, c, h, w], dx)
    }

    fn kind(&self) -> LayerKind {
        LayerKind::GlobalAvgPool
    }
}

/// Layers applied in order.
pub struct Sequential<T: Scalar> {
    pub layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> Sequential<T> {
    pub fn new(layers: Vec<Box<dyn Layer<T>>>) -> Self {
        Self { layers }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Tensor<T> {
        let mut h = x.clone();
        for l in &mut self.layers {
            h = l.forward(&h, mode);
        }
        h
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let mut g = dy.clone();
        for l in self.layers.iter_mut().rev() {
            g = l.backward(&g);
        }
        g
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params()).collect()
    }

    pub fn buffers(&mut self) -> Vec<(String, &mut Vec<T>)> {
        self.layers.iter_mut().flat_map(|l| l.buffers()).collect()
    }

    pub fn reseed(&mut self, seed: u64) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            l.reseed(seed.wrapping_add(i as u64));
        }
    }
}
