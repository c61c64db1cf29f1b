//! Gradient-check helpers shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valvetime::labels::MASK;
use valvetime::models::{CellType, ClassificationNetConfig};
use valvetime::nn::{ArchSpec, Network, Tensor};
use valvetime::train::{masked_categorical_crossentropy, masked_mse};

#[derive(Clone, Copy)]
pub enum Loss {
    Ce,
    Mse,
}

fn loss_of(kind: Loss, y: &Tensor<f64>, labels: &[f32]) -> (f64, Tensor<f64>) {
    let out = match kind {
        Loss::Ce => masked_categorical_crossentropy(y, labels),
        Loss::Mse => masked_mse(y, labels),
    };
    (out.value, out.grad)
}

/// Largest `|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)` over
/// all parameters, with central differences of step 1e-6.
pub fn max_relative_error(spec: &ArchSpec, lengths: &[usize], t: usize, kind: Loss, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [c, h, w] = spec.input;
    let n = lengths.len();
    let x = Tensor::<f64>::from_vec(&[n, c, t, h, w], (0..n * c * t * h * w).map(|_| rng.gen_range(0.0..1.0)).collect());
    let mut net: Network<f64> = Network::new(spec, seed).unwrap();
    let probe = net.forward(x.clone(), lengths, true).unwrap();
    let out_c = probe.shape[2];
    let mut labels = Vec::with_capacity(n * t * out_c);
    for (i, &len) in lengths.iter().enumerate() {
        for f in 0..t {
            let masked = f >= len || (i + f) % 5 == 3;
            match kind {
                Loss::Ce => labels.push(if masked { MASK } else { rng.gen_range(0..out_c) as f32 }),
                Loss::Mse => {
                    for _ in 0..out_c {
                        labels.push(if masked { MASK } else { rng.gen_range(0.0..1.0) });
                    }
                }
            }
        }
    }
    let eval = |net: &mut Network<f64>| loss_of(kind, &net.forward(x.clone(), lengths, true).unwrap(), &labels);

    let (_, grad) = eval(&mut net);
    net.zero_grad();
    net.backward(grad, lengths);
    let mut analytic = Vec::new();
    net.for_each_param(|p| analytic.push(p.grad.to_vec()));

    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for (pi, a_grads) in analytic.iter().enumerate() {
        for (k, &a) in a_grads.iter().enumerate() {
            let nudge = |net: &mut Network<f64>, d: f64| {
                let mut idx = 0;
                net.for_each_param(|p| {
                    if idx == pi {
                        p.value[k] += d;
                    }
                    idx += 1;
                });
            };
            nudge(&mut net, step);
            let up = eval(&mut net).0;
            nudge(&mut net, -2.0 * step);
            let down = eval(&mut net).0;
            nudge(&mut net, step);
            let numeric = (up - down) / (2.0 * step);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(rel);
        }
    }
    let norm: f64 = analytic.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm > 1e-6, "gradient vanished");
    eprintln!("max relative error {worst:e}, gradient norm {norm:e}");
    worst
}

pub fn tiny_classifier(cell: CellType, bidirectional: bool) -> ArchSpec {
    ClassificationNetConfig {
        input_size: 8,
        n_blocks: 2,
        base_filters: 2,
        first_spatial_kernel: 3,
        cell,
        recurrent_units: 3,
        bidirectional,
        n_classes: 4,
        ..ClassificationNetConfig::toy()
    }
    .arch()
    .unwrap()
}

/// Finite-difference derivative of the loss with respect to each prediction
/// at a masked frame.
pub fn masked_fd(kind: Loss) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n, t, c) = (2, 7, 6);
    let mut raw: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(0.05..1.0)).collect();
    if let Loss::Ce = kind {
        for row in raw.chunks_mut(c) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    let labels: Vec<f32> = match kind {
        Loss::Ce => (0..n * t).map(|f| if f % 3 == 1 { MASK } else { (f % c) as f32 }).collect(),
        Loss::Mse => (0..n * t * c)
            .map(|k| if (k / c) % 3 == 1 { MASK } else { 0.5 })
            .collect(),
    };
    let masked_frame = |frame: usize| match kind {
        Loss::Ce => labels[frame] == MASK,
        Loss::Mse => labels[frame * c] == MASK,
    };
    let value = |d: &[f64]| loss_of(kind, &Tensor::from_vec(&[n, t, c], d.to_vec()), &labels).0;
    let step = 1e-6;
    let mut worst: f64 = 0.0;
    for k in 0..raw.len() {
        if !masked_frame(k / c) {
            continue;
        }
        let mut up = raw.clone();
        up[k] += step;
        let mut down = raw.clone();
        down[k] -= step;
        worst = worst.max(((value(&up) - value(&down)) / (2.0 * step)).abs());
    }
    let (_, grad) = loss_of(kind, &Tensor::from_vec(&[n, t, c], raw.clone()), &labels);
    for (k, g) in grad.data.iter().enumerate() {
        if masked_frame(k / c) {
            worst = worst.max(g.abs());
        }
    }
    worst
}

