//! The adversarial critic: scores an (image, label planes) pair as real or produced.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Conv2d, GlobalAvgPool, Layer, Mode, Param, Sequential, Sigmoid};
use super::mnet::{encoder_block, NetShape, ENCODER_FILTERS};
use super::tensor::{Scalar, Tensor, concat_channels, split_channels};
use super::NetError;

/// Number of convolution blocks in the critic.
pub const ANET_DEPTH: usize = 6;

pub struct ANet<T: Scalar> {
    in_channels: usize,
    num_tasks: usize,
    body: Sequential<T>,
}

impl<T: Scalar> ANet<T> {
    /// Input channels are the image channels plus one plane per task.
    pub fn new(shape: &NetShape, seed: u64) -> Result<Self, NetError> {
        shape.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let num_tasks = shape.task_classes.len();
        let in_channels = shape.in_channels + num_tasks;
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::new();
        let mut cin = in_channels;
        for (i, &k) in ENCODER_FILTERS[..ANET_DEPTH].iter().enumerate() {
            let w = shape.width(k);
            layers.extend(encoder_block::<T>(&format!("anet.c{i}"), cin, w, &mut rng).layers);
            cin = w;
        }
        layers.push(Box::new(Conv2d::new("anet.head", cin, 1, 1, 1, 0, &mut rng)));
        layers.push(Box::new(GlobalAvgPool::new()));
        layers.push(Box::new(Sigmoid::new()));
        Ok(Self { in_channels, num_tasks, body: Sequential::new(layers) })
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    /// Returns one probability per sample, shape `(N, 1)`.
    pub fn forward(&mut self, img: &Tensor<T>, planes: &Tensor<T>, mode: Mode) -> Result<Tensor<T>, NetError> {
        let (n, c, h, w) = img.dims4();
        let (pn, pc, ph, pw) = planes.dims4();
        let div = 1usize << ANET_DEPTH;
        if c + pc != self.in_channels || pc != self.num_tasks || (n, h, w) != (pn, ph, pw) || h % div != 0 || w % div != 0 {
            return Err(NetError::ShapeMismatch(format!(
                "critic input {:?} + {:?}, expects {} channels total",
                img.shape(),
                planes.shape(),
                self.in_channels
            )));
        }
        Ok(self.body.forward(&concat_channels(img, planes), mode))
    }

    /// Gradient w.r.t. the label planes of the last forward pass.
    pub fn backward(&mut self, da: &Tensor<T>) -> Tensor<T> {
        let dx = self.body.backward(da);
        split_channels(&dx, self.in_channels - self.num_tasks).1
    }

    pub fn params(&mut self) -> Vec<&mut Param<T>> {
        self.body.params()
    }

    pub fn buffers(&mut self) -> Vec<(String, &mut Vec<T>)> {
        self.body.buffers()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params() {
            p.value.zero_grad();
        }
    }
}
