//! The multi-task encoder-decoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, Layer, LeakyRelu, Mode, Param, Relu, Sequential,
    softmax_channels,
};
use super::tensor::{Scalar, Tensor, concat_channels, split_channels};
use super::NetError;

pub const ENCODER_FILTERS: [usize; 8] = [64, 128, 256, 512, 512, 512, 512, 512];
pub const DECODER_FILTERS: [usize; 8] = [512, 1024, 1024, 1024, 1024, 512, 256, 128];
/// Which decoder entries carry dropout (the `CD` blocks).
pub const DECODER_DROPOUT: [bool; 8] = [true, true, true, false, false, false, false, false];
pub const LEAKY_SLOPE: f64 = 0.2;
pub const DROPOUT_RATE: f64 = 0.5;

/// Shape of both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetShape {
    /// Image channels (γ).
    pub in_channels: usize,
    /// Classes per task (K^t).
    pub task_classes: Vec<usize>,
    /// Multiplier on every filter count; 1.0 is the full-size network.
    pub channel_scale: f64,
    /// Number of encoder (and decoder) blocks, at most 8.
    pub depth: usize,
}

impl NetShape {
    pub fn full(task_classes: Vec<usize>) -> Self {
        Self { in_channels: 3, task_classes, channel_scale: 1.0, depth: 8 }
    }

    /// Sixteen times narrower and two blocks shallower; sized for 256×192 inputs on a CPU.
    pub fn desk(task_classes: Vec<usize>) -> Self {
        Self { in_channels: 3, task_classes, channel_scale: 1.0 / 16.0, depth: 6 }
    }

    pub fn width(&self, k: usize) -> usize {
        ((k as f64 * self.channel_scale).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(1..=8).contains(&self.depth) {
            return Err(NetError::ShapeMismatch(format!("depth {} not in 1..=8", self.depth)));
        }
        if self.in_channels == 0 || self.task_classes.is_empty() || self.task_classes.iter().any(|&k| k < 2) {
            return Err(NetError::ShapeMismatch("need ≥1 input channel and ≥2 classes per task".into()));
        }
        if !(self.channel_scale > 0.0) {
            return Err(NetError::ShapeMismatch("channel_scale must be positive".into()));
        }
        Ok(())
    }

    /// Checks that an `(N, γ, h, w)` batch fits the network.
    pub fn check_input(&self, shape: &[usize]) -> Result<(), NetError> {
        let div = 1usize << self.depth;
        if shape.len() != 4 || shape[1] != self.in_channels || shape[2] % div != 0 || shape[3] % div != 0 {
            return Err(NetError::ShapeMismatch(format!(
                "input {:?} needs {} channels and sides divisible by {div}",
                shape, self.in_channels
            )));
        }
        Ok(())
    }
}

/// Per-task probability volumes, each `(N, K^t, h, w)` and softmax-normalized over channels.
#[derive(Debug, Clone)]
pub struct NetOutput<T: Scalar> {
    pub probs: Vec<Tensor<T>>,
}

impl<T: Scalar> NetOutput<T> {
    pub fn num_tasks(&self) -> usize {
        self.probs.len()
    }

    pub fn batch(&self) -> usize {
        self.probs[0].shape()[0]
    }
}

pub(crate) fn encoder_block<T: Scalar>(name: &str, cin: usize, cout: usize, rng: &mut ChaCha8Rng) -> Sequential<T> {
    Sequential::new(vec![
        Box::new(Conv2d::down(&format!("{name}.conv"), cin, cout, rng)),
        Box::new(BatchNorm2d::new(&format!("{name}.bn"), cout, rng)),
        Box::new(LeakyRelu::new(LEAKY_SLOPE)),
    ])
}

fn decoder_block<T: Scalar>(
    name: &str,
    cin: usize,
    cout: usize,
    dropout: bool,
    rng: &mut ChaCha8Rng,
) -> Sequential<T> {
    let mut layers: Vec<Box<dyn Layer<T>>> = vec![
        Box::new(ConvTranspose2d::up(&format!("{name}.deconv"), cin, cout, rng)),
        Box::new(BatchNorm2d::new(&format!("{name}.bn"), cout, rng)),
    ];
    if dropout {
        layers.push(Box::new(Dropout::new(DROPOUT_RATE, 0)));
    }
    layers.push(Box::new(Relu::new()));
    Sequential::new(layers)
}

/// U-shaped network with skip connections and one softmax head per task.
pub struct MNet<T: Scalar> {
    shape: NetShape,
    encoder: Vec<Sequential<T>>,
    decoder: Vec<Sequential<T>>,
    dec_out: Vec<usize>,
    heads: Vec<Conv2d<T>>,
    probs: Vec<Tensor<T>>,
}

impl<T: Scalar> MNet<T> {
    pub fn new(shape: &NetShape, seed: u64) -> Result<Self, NetError> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = shape.depth;
        let enc_w: Vec<usize> = ENCODER_FILTERS[..d].iter().map(|&k| shape.width(k)).collect();
        let mut encoder = Vec::with_capacity(d);
        let mut cin = shape.in_channels;
        for (i, &w) in enc_w.iter().enumerate() {
            encoder.push(encoder_block(&format!("mnet.enc{i}"), cin, w, &mut rng));
            cin = w;
        }
        let first = 8 - d;
        let mut decoder = Vec::with_capacity(d);
        let mut dec_out = Vec::with_capacity(d);
        for j in 0..d {
            let w = shape.width(DECODER_FILTERS[first + j]);
            decoder.push(decoder_block(&format!("mnet.dec{j}"), cin, w, DECODER_DROPOUT[first + j], &mut rng));
            dec_out.push(w);
            cin = if j + 1 < d { w + enc_w[d - 2 - j] } else { w };
        }
        let heads = shape
            .task_classes
            .iter()
            .enumerate()
            .map(|(t, &k)| Conv2d::new(&format!("mnet.head{t}"), cin, k, 1, 1, 0, &mut rng))
            .collect();
        Ok(Self { shape: shape.clone(), encoder, decoder, dec_out, heads, probs: Vec::new() })
    }

    pub fn shape(&self) -> &NetShape {
        &self.shape
    }

    /// Zeroes every head so the output is uniform; used by tests.
    pub fn zero_heads(&mut self) {
        for h in &mut self.heads {
            h.weight.value.data_mut().iter_mut().for_each(|v| *v = T::zero());
            h.bias.value.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<NetOutput<T>, NetError> {
        self.shape.check_input(x.shape())?;
        let d = self.shape.depth;
        let mut skips = Vec::with_capacity(d);
        let mut h = x.clone();
        for e in &mut self.encoder {
            h = e.forward(&h, mode);
            skips.push(h.clone());
        }
        for j in 0..d {
            h = self.decoder[j].forward(&h, mode);
            if j + 1 < d {
                h = concat_channels(&h, &skips[d - 2 - j]);
            }
        }
        self.probs = self.heads.iter_mut().map(|head| softmax_channels(&head.forward(&h, mode))).collect();
        Ok(NetOutput { probs: self.probs.clone() })
    }

    /// Backpropagates gradients w.r.t. each head's pre-softmax logits and
    /// accumulates parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, dlogits: &[Tensor<T>]) -> Tensor<T> {
        let d = self.shape.depth;
        let mut g: Option<Tensor<T>> = None;
        for (head, dl) in self.heads.iter_mut().zip(dlogits) {
            let gi = head.backward(dl);
            match g.as_mut() {
                Some(acc) => acc.add_assign(&gi),
                None => g = Some(gi),
            }
        }
        let mut g = g.expect("at least one head");
        let mut dskip: Vec<Option<Tensor<T>>> = vec![None; d];
        for j in (0..d).rev() {
            if j + 1 < d {
                let (gd, gs) = split_channels(&g, self.dec_out[j]);
                dskip[d - 2 - j] = Some(gs);
                g = gd;
            }
            g = self.decoder[j].backward(&g);
        }
        for i in (0..d).rev() {
            if let Some(s) = dskip[i].take() {
                g.add_assign(&s);
            }
            g = self.encoder[i].backward(&g);
        }
        g
    }

    /// Probabilities from the most recent forward pass.
    pub fn last_probs(&self) -> &[Tensor<T>] {
        &self.probs
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        let mut out: Vec<&mut Param<T>> = Vec::new();
        for s in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend(s.params());
        }
        for h in &mut self.heads {
            out.extend(h.params());
        }
        out
    }

    pub fn buffers(&mut self) -> Vec<(String, &mut Vec<T>)> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut()).flat_map(|s| s.buffers()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params() {
            p.value.zero_grad();
        }
    }

    /// Re-seeds the dropout layers; called once per training step.
    pub fn reseed(&mut self, seed: u64) {
        for (j, s) in self.decoder.iter_mut().enumerate() {
            s.reseed(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(j as u64 * 1000));
        }
    }
}
