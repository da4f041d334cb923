//! Losses, class weighting and the label/plane conversions around them.

use crate::raster::{LabelMap, LabelMapStack};

use super::mnet::NetOutput;
use super::tensor::{Scalar, Tensor};
use super::NetError;

/// Clamp applied to critic outputs before taking logs.
pub const CRITIC_EPS: f64 = 1e-7;

/// Default `c` in `w_k = 1 / ln(c + p_k)`.
pub const DEFAULT_WEIGHT_C: f64 = 1.02;

fn clamp_prob(a: f64) -> f64 {
    a.clamp(CRITIC_EPS, 1.0 - CRITIC_EPS)
}

// Outside the clamp range the clamped log is flat.
fn inside(a: f64) -> bool {
    a > CRITIC_EPS && a < 1.0 - CRITIC_EPS
}

/// `w_k = 1 / ln(c + p_k)` for every class prior.
pub fn compute_class_weights(priors: &[f64], c: f64) -> Result<Vec<f64>, NetError> {
    priors
        .iter()
        .map(|&p| {
            if c + p <= 1.0 || !(c + p).is_finite() {
                Err(NetError::DomainError(format!("c + p_k = {} must exceed 1", c + p)))
            } else {
                Ok(1.0 / (c + p).ln())
            }
        })
        .collect()
}

/// Per-task class frequencies over a set of label stacks.
pub fn class_priors(stacks: &[LabelMapStack]) -> Vec<Vec<f64>> {
    let Some(first) = stacks.first() else { return Vec::new() };
    let mut counts: Vec<Vec<f64>> = first.classes().iter().map(|&k| vec![0.0; k]).collect();
    for s in stacks {
        for (t, m) in s.maps.iter().enumerate() {
            for &v in &m.data {
                counts[t][v as usize] += 1.0;
            }
        }
    }
    for c in &mut counts {
        let total: f64 = c.iter().sum();
        if total > 0.0 {
            c.iter_mut().for_each(|v| *v /= total);
        }
    }
    counts
}

fn check_targets<T: Scalar>(out: &NetOutput<T>, targets: &[LabelMapStack], weights: &[Vec<f64>]) -> Result<(), NetError> {
    if targets.len() != out.batch() || weights.len() != out.num_tasks() {
        return Err(NetError::ShapeMismatch(format!(
            "{} targets / {} weight sets for batch {} with {} tasks",
            targets.len(),
            weights.len(),
            out.batch(),
            out.num_tasks()
        )));
    }
    for (t, p) in out.probs.iter().enumerate() {
        let (_, k, h, w) = p.dims4();
        if weights[t].len() != k {
            return Err(NetError::ShapeMismatch(format!("task {t}: {} weights for {k} classes", weights[t].len())));
        }
        if weights[t].iter().any(|&v| !(v > 0.0)) {
            return Err(NetError::NonPositiveWeight);
        }
        for s in targets {
            let m = s.maps.get(t).ok_or_else(|| NetError::ShapeMismatch(format!("target lacks task {t}")))?;
            if (m.height as usize, m.width as usize) != (h, w) || m.num_classes != k {
                return Err(NetError::ShapeMismatch(format!("task {t}: target {}x{} vs output {w}x{h}", m.width, m.height)));
            }
        }
    }
    Ok(())
}

/// Weighted multi-task cross-entropy, averaged over pixels, tasks and the batch.
pub fn cross_entropy_multitask<T: Scalar>(
    out: &NetOutput<T>,
    targets: &[LabelMapStack],
    weights: &[Vec<f64>],
) -> Result<f64, NetError> {
    check_targets(out, targets, weights)?;
    let tasks = out.num_tasks();
    let mut total = 0.0;
    for (n, s) in targets.iter().enumerate() {
        let mut sum = 0.0;
        let mut pixels = 0usize;
        for (t, p) in out.probs.iter().enumerate() {
            let (_, k, h, w) = p.dims4();
            let plane = h * w;
            let base = n * k * plane;
            pixels = plane;
            for (i, &y) in s.maps[t].data.iter().enumerate() {
                let prob = p.data()[base + y as usize * plane + i].as_f64();
                sum += weights[t][y as usize] * prob.max(f64::MIN_POSITIVE).ln();
            }
        }
        total += -sum / (tasks * pixels) as f64;
    }
    Ok(total / targets.len() as f64)
}

/// Gradient of [`cross_entropy_multitask`] w.r.t. each head's logits.
pub fn cross_entropy_logit_grad<T: Scalar>(
    out: &NetOutput<T>,
    targets: &[LabelMapStack],
    weights: &[Vec<f64>],
) -> Result<Vec<Tensor<T>>, NetError> {
    check_targets(out, targets, weights)?;
    let tasks = out.num_tasks();
    let batch = targets.len();
    let mut grads = Vec::with_capacity(tasks);
    for (t, p) in out.probs.iter().enumerate() {
        let (_, k, h, w) = p.dims4();
        let plane = h * w;
        let scale = 1.0 / (batch * tasks * plane) as f64;
        let mut g = p.data().to_vec();
        for (n, s) in targets.iter().enumerate() {
            let base = n * k * plane;
            for (i, &y) in s.maps[t].data.iter().enumerate() {
                let wy = T::from_f64(weights[t][y as usize] * scale);
                for c in 0..k {
                    let j = base + c * plane + i;
                    g[j] *= wy;
                }
                g[base + y as usize * plane + i] -= wy;
            }
        }
        grads.push(Tensor::from_vec(p.shape().to_vec(), g));
    }
    Ok(grads)
}

/// Critic loss for one pair: `−½[ln a_real + ln(1 − a_fake)]`.
pub fn loss_anet(a_real: f64, a_fake: f64) -> f64 {
    -0.5 * (clamp_prob(a_real).ln() + (1.0 - clamp_prob(a_fake)).ln())
}

/// `−½ · mean ln a` over critic outputs on real labels, with its gradient.
pub fn critic_real_term(a_real: &[f64]) -> (f64, Vec<f64>) {
    let n = a_real.len() as f64;
    let v = a_real.iter().map(|&a| clamp_prob(a).ln()).sum::<f64>() / n;
    let g = a_real.iter().map(|&a| if inside(a) { -0.5 / (n * a) } else { 0.0 }).collect();
    (-0.5 * v, g)
}

/// `−½ · mean ln(1 − a)` over critic outputs on produced labels, with its gradient.
pub fn critic_fake_term(a_fake: &[f64]) -> (f64, Vec<f64>) {
    let n = a_fake.len() as f64;
    let v = a_fake.iter().map(|&a| (1.0 - clamp_prob(a)).ln()).sum::<f64>() / n;
    let g = a_fake.iter().map(|&a| if inside(a) { 0.5 / (n * (1.0 - a)) } else { 0.0 }).collect();
    (-0.5 * v, g)
}

/// Batched critic loss: the sum of [`critic_real_term`] and [`critic_fake_term`].
pub fn loss_anet_batch(a_real: &[f64], a_fake: &[f64]) -> f64 {
    critic_real_term(a_real).0 + critic_fake_term(a_fake).0
}

/// Segmentation loss plus `λ·ln(1 − a_fake)`, which falls as the critic is fooled.
pub fn loss_mnet(ce: f64, a_fake: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return ce;
    }
    ce + lambda * (1.0 - clamp_prob(a_fake)).ln()
}

/// Batched adversarial term `λ · mean ln(1 − a)` and its gradient per output.
pub fn adversarial_term(a_fake: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = a_fake.len() as f64;
    let v = a_fake.iter().map(|&a| (1.0 - clamp_prob(a)).ln()).sum::<f64>() / n;
    let g = a_fake
        .iter()
        .map(|&a| if inside(a) { -lambda / (n * (1.0 - a)) } else { 0.0 })
        .collect();
    (lambda * v, g)
}

/// Plane `t` holds `class / (K^t − 1)`, so every plane lies in `[0, 1]`.
pub fn encode_labels_for_critic<T: Scalar>(labels: &LabelMapStack) -> Tensor<T> {
    let (w, h) = (labels.width() as usize, labels.height() as usize);
    let mut data = Vec::with_capacity(labels.num_tasks() * w * h);
    for m in &labels.maps {
        let denom = (m.num_classes - 1) as f64;
        data.extend(m.data.iter().map(|&v| T::from_f64(v as f64 / denom)));
    }
    Tensor::from_vec(vec![labels.num_tasks(), h, w], data)
}

/// Batched [`encode_labels_for_critic`], shape `(N, T, h, w)`.
pub fn encode_batch<T: Scalar>(labels: &[LabelMapStack]) -> Tensor<T> {
    Tensor::stack(&labels.iter().map(encode_labels_for_critic).collect::<Vec<_>>())
}

/// Differentiable stand-in for the encoded argmax: `Σ_c c/(K−1) · P_c`.
pub fn soft_planes<T: Scalar>(out: &NetOutput<T>) -> Tensor<T> {
    let n = out.batch();
    let (_, _, h, w) = out.probs[0].dims4();
    let plane = h * w;
    let tasks = out.num_tasks();
    let mut data = vec![T::zero(); n * tasks * plane];
    for (t, p) in out.probs.iter().enumerate() {
        let k = p.shape()[1];
        for i in 0..n {
            let dst = &mut data[(i * tasks + t) * plane..(i * tasks + t + 1) * plane];
            for c in 1..k {
                let f = T::from_f64(c as f64 / (k - 1) as f64);
                let src = &p.data()[(i * k + c) * plane..(i * k + c + 1) * plane];
                dst.iter_mut().zip(src).for_each(|(d, &s)| *d += f * s);
            }
        }
    }
    Tensor::from_vec(vec![n, tasks, h, w], data)
}

/// Chains a gradient on [`soft_planes`] back to per-task probability gradients.
pub fn soft_planes_backward<T: Scalar>(out: &NetOutput<T>, dplanes: &Tensor<T>) -> Vec<Tensor<T>> {
    let tasks = out.num_tasks();
    out.probs
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let (n, k, h, w) = p.dims4();
            let plane = h * w;
            let mut g = vec![T::zero(); p.len()];
            for i in 0..n {
                let src = &dplanes.data()[(i * tasks + t) * plane..(i * tasks + t + 1) * plane];
                for c in 1..k {
                    let f = T::from_f64(c as f64 / (k - 1) as f64);
                    let dst = &mut g[(i * k + c) * plane..(i * k + c + 1) * plane];
                    dst.iter_mut().zip(src).for_each(|(d, &s)| *d = f * s);
                }
            }
            Tensor::from_vec(p.shape().to_vec(), g)
        })
        .collect()
}

/// Per-pixel argmax per task; ties go to the lowest class index.
pub fn predict_labels<T: Scalar>(out: &NetOutput<T>) -> Vec<LabelMapStack> {
    let n = out.batch();
    (0..n)
        .map(|i| {
            let maps = out
                .probs
                .iter()
                .enumerate()
                .map(|(t, p)| {
                    let (_, k, h, w) = p.dims4();
                    let plane = h * w;
                    let mut m = LabelMap::zeros(t + 1, k, w as u32, h as u32);
                    let base = i * k * plane;
                    for px in 0..plane {
                        let mut best = 0usize;
                        let mut bv = p.data()[base + px];
                        for c in 1..k {
                            let v = p.data()[base + c * plane + px];
                            if v > bv {
                                best = c;
                                bv = v;
                            }
                        }
                        m.data[px] = best as u8;
                    }
                    m
                })
                .collect();
            LabelMapStack::new(maps)
        })
        .collect()
}
