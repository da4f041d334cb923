//! Alternating adversarial training of the two networks.

use serde::{Deserialize, Serialize};

use crate::raster::LabelMapStack;

use super::adam::Adam;
use super::anet::{ANet, ANET_DEPTH};
use super::layers::{softmax_backward, Mode};
use super::loss::{
    adversarial_term, cross_entropy_logit_grad, cross_entropy_multitask, critic_fake_term, critic_real_term, encode_batch,
    predict_labels, soft_planes, soft_planes_backward, DEFAULT_WEIGHT_C,
};
use super::mnet::{MNet, NetOutput, NetShape};
use super::tensor::{Scalar, Tensor};
use super::NetError;

/// Everything needed to rebuild and train the networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_c: f64,
    pub channel_scale: f64,
    pub depth: usize,
    pub in_channels: usize,
    pub task_classes: Vec<usize>,
    pub height: usize,
    pub width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 0.01,
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            batch_size: 8,
            epochs: 10,
            seed: 0,
            weight_c: DEFAULT_WEIGHT_C,
            channel_scale: 1.0 / 16.0,
            depth: 6,
            in_channels: 3,
            task_classes: vec![2, 7],
            height: 256,
            width: 192,
        }
    }
}

impl TrainConfig {
    /// The full-size network at 1024×768.
    pub fn full_scale() -> Self {
        Self { channel_scale: 1.0, depth: 8, height: 1024, width: 768, ..Self::default() }
    }

    pub fn net_shape(&self) -> NetShape {
        NetShape {
            in_channels: self.in_channels,
            task_classes: self.task_classes.clone(),
            channel_scale: self.channel_scale,
            depth: self.depth,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.lambda >= 0.0) || !(self.weight_c >= 0.0) || !(self.learning_rate > 0.0) || self.batch_size == 0 {
            return Err(NetError::InvalidConfig(
                "need λ ≥ 0, c ≥ 0, learning_rate > 0 and batch_size ≥ 1".into(),
            ));
        }
        self.net_shape().validate()?;
        self.net_shape().check_input(&[1, self.in_channels, self.height, self.width])?;
        let div = 1usize << ANET_DEPTH;
        if self.height % div != 0 || self.width % div != 0 {
            return Err(NetError::ShapeMismatch(format!(
                "critic needs sides divisible by {div}, got {}×{}",
                self.height, self.width
            )));
        }
        Ok(())
    }
}

/// Losses of one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub l_m: f64,
    pub l_a: f64,
    pub ce: f64,
}

/// Both networks, their optimizers and the step counter.
pub struct Trainer<T: Scalar> {
    pub cfg: TrainConfig,
    pub mnet: MNet<T>,
    pub anet: ANet<T>,
    pub opt_m: Adam<T>,
    pub opt_a: Adam<T>,
    pub step: u64,
    pub class_weights: Vec<Vec<f64>>,
}

fn column<T: Scalar>(t: &Tensor<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.as_f64()).collect()
}

fn as_column<T: Scalar>(v: &[f64]) -> Tensor<T> {
    Tensor::from_vec(vec![v.len(), 1], v.iter().map(|&x| T::from_f64(x)).collect())
}

impl<T: Scalar> Trainer<T> {
    /// M-net is initialized from `seed`, A-net from `seed + 1`. Class weights start at 1.
    pub fn new(cfg: TrainConfig) -> Result<Self, NetError> {
        cfg.validate()?;
        let shape = cfg.net_shape();
        let mnet = MNet::new(&shape, cfg.seed)?;
        let anet = ANet::new(&shape, cfg.seed.wrapping_add(1))?;
        let opt_m = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2);
        let opt_a = Adam::new(cfg.learning_rate, cfg.beta1, cfg.beta2);
        let class_weights = cfg.task_classes.iter().map(|&k| vec![1.0; k]).collect();
        Ok(Self { cfg, mnet, anet, opt_m, opt_a, step: 0, class_weights })
    }

    pub fn set_class_weights(&mut self, weights: Vec<Vec<f64>>) -> Result<(), NetError> {
        if weights.len() != self.cfg.task_classes.len()
            || weights.iter().zip(&self.cfg.task_classes).any(|(w, &k)| w.len() != k)
        {
            return Err(NetError::ShapeMismatch("class weights do not match task classes".into()));
        }
        if weights.iter().flatten().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(NetError::NonPositiveWeight);
        }
        self.class_weights = weights;
        Ok(())
    }

    /// Computes the gradients of the M-net objective for `batch` and leaves
    /// them in the M-net parameters without updating anything.
    /// Returns `(l_m, ce)`.
    pub fn mnet_gradients(
        &mut self,
        batch: &Tensor<T>,
        targets: &[LabelMapStack],
        out: &NetOutput<T>,
    ) -> Result<(f64, f64), NetError> {
        let ce = cross_entropy_multitask(out, targets, &self.class_weights)?;
        let mut dlogits = cross_entropy_logit_grad(out, targets, &self.class_weights)?;
        let mut l_m = ce;
        if self.cfg.lambda > 0.0 {
            let planes = soft_planes(out);
            let a = self.anet.forward(batch, &planes, Mode::Train)?;
            let (adv, da) = adversarial_term(&column(&a), self.cfg.lambda);
            l_m += adv;
            let dplanes = self.anet.backward(&as_column(&da));
            self.anet.zero_grad();
            for ((dl, dp), p) in dlogits.iter_mut().zip(soft_planes_backward(out, &dplanes)).zip(&out.probs) {
                dl.add_assign(&softmax_backward(p, &dp));
            }
        }
        self.mnet.backward(&dlogits);
        Ok((l_m, ce))
    }

    /// One critic update followed by one segmentation-network update.
    pub fn train_step(&mut self, batch: &Tensor<T>, targets: &[LabelMapStack]) -> Result<StepLosses, NetError> {
        self.mnet.reseed(self.cfg.seed.wrapping_add(self.step));
        self.mnet.zero_grad();
        self.anet.zero_grad();
        let out = self.mnet.forward(batch, Mode::Train)?;

        let real = encode_batch::<T>(targets);
        let fake = encode_batch::<T>(&predict_labels(&out));
        let a_real = self.anet.forward(batch, &real, Mode::Train)?;
        let (real_term, dr) = critic_real_term(&column(&a_real));
        self.anet.backward(&as_column(&dr));
        let a_fake = self.anet.forward(batch, &fake, Mode::Train)?;
        let (fake_term, df) = critic_fake_term(&column(&a_fake));
        self.anet.backward(&as_column(&df));
        let l_a = real_term + fake_term;
        self.opt_a.step(self.anet.params());

        let (l_m, ce) = self.mnet_gradients(batch, targets, &out)?;
        self.opt_m.step(self.mnet.params());
        self.step += 1;

        if !(l_m.is_finite() && l_a.is_finite() && ce.is_finite()) {
            return Err(NetError::NonFiniteLoss { step: self.step, l_m, l_a, ce });
        }
        Ok(StepLosses { l_m, l_a, ce })
    }

    /// Evaluation-mode forward pass.
    pub fn predict(&mut self, batch: &Tensor<T>) -> Result<NetOutput<T>, NetError> {
        self.mnet.forward(batch, Mode::Eval)
    }
}
