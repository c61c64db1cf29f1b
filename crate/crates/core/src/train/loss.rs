//! Masked losses. Labels equal to `-1` contribute nothing to the value or
//! the gradient.

use crate::labels::MASK;
use crate::nn::{Scalar, Tensor};

/// Probability floor (and `1 - EPS` ceiling) applied before the log.
pub const EPS: f64 = 1e-7;

/// Loss value and its gradient w.r.t. the predictions.
#[derive(Clone, Debug)]
pub struct LossOutput<S> {
    pub value: f64,
    pub grad: Tensor<S>,
    /// Number of unmasked label entries that contributed.
    pub count: usize,
}

/// Mean over unmasked frames of `-ln p[true class]`, with `p` clamped to
/// `[EPS, 1 - EPS]`. `probs` is `[batch, frame, class]`, `labels` holds one
/// class index (or `-1`) per frame.
pub fn masked_categorical_crossentropy<S: Scalar>(probs: &Tensor<S>, labels: &[f32]) -> LossOutput<S> {
    let c = *probs.shape.last().expect("rank >= 1");
    assert_eq!(probs.data.len(), labels.len() * c, "labels do not match predictions");
    let count = labels.iter().filter(|&&l| l != MASK).count();
    let mut grad = Tensor::zeros(&probs.shape);
    if count == 0 {
        return LossOutput { value: 0.0, grad, count };
    }
    let mut total = 0.0;
    let inv = 1.0 / count as f64;
    for (f, &l) in labels.iter().enumerate() {
        if l == MASK {
            continue;
        }
        let k = f * c + l as usize;
        let p = probs.data[k].as_f64();
        let pc = p.clamp(EPS, 1.0 - EPS);
        total -= pc.ln();
        if p == pc {
            grad.data[k] = S::from_f64(-inv / p);
        }
    }
    LossOutput {
        value: total * inv,
        grad,
        count,
    }
}

/// Mean squared error over unmasked entries; `target` has the same layout
/// as `pred`.
pub fn masked_mse<S: Scalar>(pred: &Tensor<S>, target: &[f32]) -> LossOutput<S> {
    assert_eq!(pred.data.len(), target.len(), "labels do not match predictions");
    let count = target.iter().filter(|&&l| l != MASK).count();
    let mut grad = Tensor::zeros(&pred.shape);
    if count == 0 {
        return LossOutput { value: 0.0, grad, count };
    }
    let inv = 1.0 / count as f64;
    let mut total = 0.0;
    for ((g, &p), &y) in grad.data.iter_mut().zip(&pred.data).zip(target) {
        if y == MASK {
            continue;
        }
        let d = p.as_f64() - f64::from(y);
        total += d * d;
        *g = S::from_f64(2.0 * d * inv);
    }
    LossOutput {
        value: total * inv,
        grad,
        count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossentropy_examples() {
        let p = Tensor::<f64>::from_vec(&[1, 1, 6], vec![0.25, 0.5, 0.25, 0.0, 0.0, 0.0]);
        let out = masked_categorical_crossentropy(&p, &[1.0]);
        assert!((out.value - 0.5f64.ln().abs()).abs() < 1e-12);

        let one_hot = Tensor::<f64>::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.0]);
        assert!(masked_categorical_crossentropy(&one_hot, &[1.0]).value < 1e-6);

        let zero = Tensor::<f64>::from_vec(&[1, 1, 2], vec![1.0, 0.0]);
        let out = masked_categorical_crossentropy(&zero, &[1.0]);
        assert!((out.value + EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn masked_frames_leave_the_loss_unchanged() {
        let p = Tensor::<f64>::from_vec(&[1, 2, 2], vec![0.3, 0.7, 0.6, 0.4]);
        let base = masked_categorical_crossentropy(&p, &[1.0, 0.0]).value;
        let padded = Tensor::<f64>::from_vec(&[1, 4, 2], vec![0.3, 0.7, 0.6, 0.4, 0.9, 0.1, 0.5, 0.5]);
        let out = masked_categorical_crossentropy(&padded, &[1.0, 0.0, MASK, MASK]);
        assert!((out.value - base).abs() < 1e-12);
        assert!(out.grad.data[4..].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mse_examples() {
        let p = Tensor::<f64>::from_vec(&[1, 1, 1], vec![0.9]);
        assert!((masked_mse(&p, &[0.4]).value - 0.25).abs() < 1e-7);
        let q = Tensor::<f64>::from_vec(&[1, 1, 3], vec![0.4, 123.0, 0.1]);
        let out = masked_mse(&q, &[0.4, MASK, 0.1]);
        assert!(out.value < 1e-14);
        assert_eq!(out.count, 2);
    }
}
