//! Analytic gradients against central finite differences in f64. Each check
//! returns the worst relative error it saw.

use doclayout::net::layers::{
    BatchNorm2d, Conv2d, ConvTranspose2d, Dropout, GlobalAvgPool, Layer, LeakyRelu, Mode, Relu, Sigmoid, Softmax,
};
use doclayout::net::loss::{
    adversarial_term, critic_fake_term, critic_real_term, cross_entropy_logit_grad, cross_entropy_multitask, loss_anet,
    loss_anet_batch, loss_mnet,
};
use doclayout::net::mnet::NetOutput;
use doclayout::net::{Scalar, Tensor, TrainConfig, Trainer};
use doclayout::raster::{LabelMap, LabelMapStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs()
    } else {
        (a - n).abs() / scale
    }
}

fn random(rng: &mut ChaCha8Rng, shape: Vec<usize>, avoid_zero: bool) -> Tensor<f64> {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| loop {
            let v: f64 = rng.random_range(-1.0..1.0);
            if !avoid_zero || v.abs() > 0.05 {
                break v;
            }
        })
        .collect();
    Tensor::from_vec(shape, data)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// Input and parameter gradients of `layer` for the scalar `<r, layer(x)>`.
fn check_layer(layer: &mut dyn Layer<f64>, x: Tensor<f64>, mode: Mode, rng: &mut ChaCha8Rng) -> f64 {
    layer.reseed(7);
    let y = layer.forward(&x, mode);
    let r = random(rng, y.shape().to_vec(), false);
    for p in layer.params() {
        p.value.zero_grad();
    }
    let dx = layer.backward(&r);
    let mut worst: f64 = 0.0;

    let eval = |layer: &mut dyn Layer<f64>, x: &Tensor<f64>| {
        layer.reseed(7);
        dot(&layer.forward(x, mode), &r)
    };

    let n = x.len();
    let picks: Vec<usize> = if n <= 64 { (0..n).collect() } else { (0..64).map(|_| rng.random_range(0..n)).collect() };
    for &i in &picks {
        let mut xp = x.clone();
        xp.data_mut()[i] += STEP;
        let mut xm = x.clone();
        xm.data_mut()[i] -= STEP;
        let num = (eval(layer, &xp) - eval(layer, &xm)) / (2.0 * STEP);
        worst = worst.max(rel_err(dx.data()[i], num));
    }

    let grads: Vec<Vec<f64>> = layer.params().iter().map(|p| p.value.grad().unwrap().to_vec()).collect();
    for (pi, g) in grads.iter().enumerate() {
        let picks: Vec<usize> =
            if g.len() <= 32 { (0..g.len()).collect() } else { (0..32).map(|_| rng.random_range(0..g.len())).collect() };
        for &j in &picks {
            let orig = layer.params()[pi].value.data()[j];
            layer.params()[pi].value.data_mut()[j] = orig + STEP;
            let fp = eval(layer, &x);
            layer.params()[pi].value.data_mut()[j] = orig - STEP;
            let fm = eval(layer, &x);
            layer.params()[pi].value.data_mut()[j] = orig;
            let num = (fp - fm) / (2.0 * STEP);
            worst = worst.max(rel_err(g[j], num));
        }
    }
    worst
}

pub fn conv() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut conv = Conv2d::<f64>::down("c", 3, 4, &mut rng);
    let x = random(&mut rng, vec![2, 3, 8, 6], false);
    let a = check_layer(&mut conv, x, Mode::Train, &mut rng);
    let mut conv1 = Conv2d::<f64>::new("h", 5, 3, 1, 1, 0, &mut rng);
    let x = random(&mut rng, vec![2, 5, 4, 4], false);
    a.max(check_layer(&mut conv1, x, Mode::Train, &mut rng))
}

pub fn conv_transpose() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut up = ConvTranspose2d::<f64>::up("u", 3, 2, &mut rng);
    let x = random(&mut rng, vec![2, 3, 3, 4], false);
    check_layer(&mut up, x, Mode::Train, &mut rng)
}

pub fn batchnorm() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut bn = BatchNorm2d::<f64>::new("bn", 3, &mut rng);
    let x = random(&mut rng, vec![2, 3, 3, 3], false);
    let a = check_layer(&mut bn, x.clone(), Mode::Train, &mut rng);
    a.max(check_layer(&mut bn, x, Mode::Eval, &mut rng))
}

pub fn activations() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = random(&mut rng, vec![2, 3, 4, 4], true);
    let mut worst: f64 = 0.0;
    worst = worst.max(check_layer(&mut LeakyRelu::<f64>::new(0.2), x.clone(), Mode::Train, &mut rng));
    worst = worst.max(check_layer(&mut Relu::<f64>::new(), x.clone(), Mode::Train, &mut rng));
    worst = worst.max(check_layer(&mut Sigmoid::<f64>::new(), x.clone(), Mode::Train, &mut rng));
    worst = worst.max(check_layer(&mut Softmax::<f64>::new(), x.clone(), Mode::Train, &mut rng));
    worst = worst.max(check_layer(&mut Dropout::<f64>::new(0.5, 0), x.clone(), Mode::Train, &mut rng));
    worst = worst.max(check_layer(&mut Dropout::<f64>::new(0.5, 0), x.clone(), Mode::Eval, &mut rng));
    worst = worst.max(check_layer(&mut GlobalAvgPool::new(), x, Mode::Train, &mut rng));
    worst
}

pub fn random_targets(rng: &mut ChaCha8Rng, n: usize, classes: &[usize], w: u32, h: u32) -> Vec<LabelMapStack> {
    (0..n)
        .map(|_| {
            LabelMapStack::new(
                classes
                    .iter()
                    .enumerate()
                    .map(|(t, &k)| {
                        let mut m = LabelMap::zeros(t, k, w, h);
                        m.data.iter_mut().for_each(|v| *v = rng.random_range(0..k) as u8);
                        m
                    })
                    .collect(),
            )
        })
        .collect()
}

pub fn cross_entropy() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let classes = [2usize, 4];
    let targets = random_targets(&mut rng, 2, &classes, 3, 2);
    let weights = vec![vec![0.7, 1.9], vec![1.0, 2.0, 0.5, 3.0]];
    let logits: Vec<Tensor<f64>> = classes.iter().map(|&k| random(&mut rng, vec![2, k, 2, 3], false)).collect();
    let loss = |lg: &[Tensor<f64>]| {
        let out = NetOutput { probs: lg.iter().map(doclayout::net::layers::softmax_channels).collect() };
        cross_entropy_multitask(&out, &targets, &weights).unwrap()
    };
    let out = NetOutput { probs: logits.iter().map(doclayout::net::layers::softmax_channels).collect() };
    let g = cross_entropy_logit_grad(&out, &targets, &weights).unwrap();
    let mut worst: f64 = 0.0;
    for t in 0..logits.len() {
        for i in 0..logits[t].len() {
            let mut p = logits.clone();
            p[t].data_mut()[i] += STEP;
            let mut m = logits.clone();
            m[t].data_mut()[i] -= STEP;
            let num = (loss(&p) - loss(&m)) / (2.0 * STEP);
            worst = worst.max(rel_err(g[t].data()[i], num));
        }
    }
    worst
}

pub fn critic_and_adversarial() -> f64 {
    let a = [0.2, 0.55, 0.9];
    let lambda = 0.3;
    let (_, dr) = critic_real_term(&a);
    let (_, df) = critic_fake_term(&a);
    let (_, dm) = adversarial_term(&a, lambda);
    let mut worst: f64 = 0.0;
    for i in 0..a.len() {
        let shifted = |d: f64| {
            let mut v = a;
            v[i] += d;
            v
        };
        let (p, m) = (shifted(STEP), shifted(-STEP));
        let nr = (critic_real_term(&p).0 - critic_real_term(&m).0) / (2.0 * STEP);
        let nf = (critic_fake_term(&p).0 - critic_fake_term(&m).0) / (2.0 * STEP);
        let nm = (adversarial_term(&p, lambda).0 - adversarial_term(&m, lambda).0) / (2.0 * STEP);
        worst = worst.max(rel_err(dr[i], nr)).max(rel_err(df[i], nf)).max(rel_err(dm[i], nm));
    }
    worst
}

fn tiny_config(lambda: f64) -> TrainConfig {
    TrainConfig {
        lambda,
        seed: 11,
        channel_scale: 1.0 / 64.0,
        depth: 3,
        height: 64,
        width: 64,
        task_classes: vec![2, 3],
        ..TrainConfig::default()
    }
}

/// Whole-network step. Normalizing a single channel makes the output very
/// sensitive to first-layer weights, so larger steps cross activation kinks.
const NET_STEP: f64 = 1e-6;

/// End-to-end check of the segmentation network objective, including the
/// adversarial term routed through the critic and the soft label planes.
pub fn mnet_objective() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tr = Trainer::<f64>::new(tiny_config(0.5)).unwrap();
    let x = random(&mut rng, vec![2, 3, 64, 64], false);
    let targets = random_targets(&mut rng, 2, &[2, 3], 64, 64);

    let objective = |tr: &mut Trainer<f64>| {
        tr.mnet.reseed(3);
        let out = tr.mnet.forward(&x, Mode::Train).unwrap();
        let ce = cross_entropy_multitask(&out, &targets, &tr.class_weights).unwrap();
        let planes = doclayout::net::loss::soft_planes(&out);
        let a = tr.anet.forward(&x, &planes, Mode::Train).unwrap();
        let av: Vec<f64> = a.data().iter().map(|v| v.as_f64()).collect();
        ce + adversarial_term(&av, tr.cfg.lambda).0
    };

    tr.mnet.zero_grad();
    tr.mnet.reseed(3);
    let out = tr.mnet.forward(&x, Mode::Train).unwrap();
    tr.mnet_gradients(&x, &targets, &out).unwrap();
    let grads: Vec<Vec<f64>> = tr.mnet.params().iter().map(|p| p.value.grad().unwrap().to_vec()).collect();

    let mut worst: f64 = 0.0;
    let nparams = grads.len();
    for pi in (0..nparams).step_by(3) {
        for _ in 0..3 {
            let j = rng.random_range(0..grads[pi].len());
            let orig = tr.mnet.params()[pi].value.data()[j];
            tr.mnet.params()[pi].value.data_mut()[j] = orig + NET_STEP;
            let fp = objective(&mut tr);
            tr.mnet.params()[pi].value.data_mut()[j] = orig - NET_STEP;
            let fm = objective(&mut tr);
            tr.mnet.params()[pi].value.data_mut()[j] = orig;
            worst = worst.max(rel_err(grads[pi][j], (fp - fm) / (2.0 * NET_STEP)));
        }
    }
    worst
}

/// With λ = 0 the objective and its gradients are exactly those of the cross entropy.
pub fn lambda_zero_is_pure_cross_entropy() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = random(&mut rng, vec![1, 3, 64, 64], false);
    let targets = random_targets(&mut rng, 1, &[2, 3], 64, 64);
    let mut tr = Trainer::<f64>::new(tiny_config(0.0)).unwrap();
    tr.mnet.reseed(1);
    let out = tr.mnet.forward(&x, Mode::Train).unwrap();
    let (l_m, ce) = tr.mnet_gradients(&x, &targets, &out).unwrap();
    let same_loss = l_m == ce;
    let g1: Vec<Vec<f64>> = tr.mnet.params().iter().map(|p| p.value.grad().unwrap().to_vec()).collect();

    tr.mnet.zero_grad();
    let dl = cross_entropy_logit_grad(&out, &targets, &tr.class_weights).unwrap();
    tr.mnet.backward(&dl);
    let g2: Vec<Vec<f64>> = tr.mnet.params().iter().map(|p| p.value.grad().unwrap().to_vec()).collect();
    same_loss && g1 == g2
}

/// Every check with its label, in a fixed order.
pub fn all() -> Vec<(&'static str, f64)> {
    vec![
        ("conv", conv()),
        ("conv transpose", conv_transpose()),
        ("batchnorm", batchnorm()),
        ("activations", activations()),
        ("cross entropy", cross_entropy()),
        ("critic and adversarial terms", critic_and_adversarial()),
        ("mnet objective", mnet_objective()),
    ]
}

/// Largest gap between the critic loss written as half the sum of its real
/// and fake cross entropies and the single-sum form, over `n` random batches.
pub fn critic_loss_forms_gap(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let len = rng.random_range(1..=16);
        let real: Vec<f64> = (0..len).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
        let fake: Vec<f64> = (0..len).map(|_| rng.random_range(1e-6..1.0 - 1e-6)).collect();
        let nf = len as f64;
        let l1 = -real.iter().map(|a| a.ln()).sum::<f64>() / nf;
        let l0 = -fake.iter().map(|a| (1.0 - a).ln()).sum::<f64>() / nf;
        let decomposed = 0.5 * (l1 + l0);
        let closed = loss_anet_batch(&real, &fake);
        let per_pair = real.iter().zip(&fake).map(|(&r, &f)| loss_anet(r, f)).sum::<f64>() / nf;
        worst = worst.max((decomposed - closed).abs()).max((decomposed - per_pair).abs());
    }
    worst
}

/// With λ = 0 the segmentation loss is the cross entropy, bit for bit.
pub fn lambda_zero_losses_are_exact(n: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).all(|_| {
        let ce = rng.random_range(0.0..10.0);
        let a: Vec<f64> = (0..rng.random_range(1..=8)).map(|_| rng.random_range(0.0..1.0)).collect();
        loss_mnet(ce, a[0], 0.0) == ce && ce + adversarial_term(&a, 0.0).0 == ce
    })
}
