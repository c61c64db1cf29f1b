//! A network assembled from an [`ArchSpec`].

use super::conv::{BatchNorm, Bottleneck, Conv3d, ConvLayer, GlobalAvgPool, MaxPool, Param, Relu};
use super::seq::{Act, Activation, CellKind, Dense, Recurrent, SeqLayer, TemporalConv};
use super::spec::{ArchSpec, ConvSpec, SeqSpec};
use super::{Ctx, Scalar, Tensor};
use crate::error::{Error, Result};
use crate::rng;

pub struct Network<S> {
    spec: ArchSpec,
    conv: Vec<ConvLayer<S>>,
    seq: Vec<SeqLayer<S>>,
    conv_out: Vec<usize>,
}

/// Mutable view of one parameter array and its gradient.
pub struct ParamSlot<'a, S> {
    pub value: &'a mut [S],
    pub grad: &'a mut [S],
}

impl<S: Scalar> Network<S> {
    /// Builds the layers of `spec` with weights drawn from `seed`.
    pub fn new(spec: &ArchSpec, seed: u64) -> Result<Self> {
        let cx = spec.complexity()?;
        let mut rng = rng::stream(seed, "init", "");
        let mut c = spec.input[0];
        let mut conv = Vec::with_capacity(spec.conv.len());
        for layer in &spec.conv {
            conv.push(match *layer {
                ConvSpec::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    let l = Conv3d::new(&mut rng, c, filters, kernel, stride, padding);
                    c = filters;
                    ConvLayer::Conv(l)
                }
                ConvSpec::BatchNorm => ConvLayer::BatchNorm(BatchNorm::new(c)),
                ConvSpec::Relu => ConvLayer::Relu(Relu::default()),
                ConvSpec::MaxPool { window, stride, padding } => ConvLayer::MaxPool(MaxPool::new(window, stride, padding)),
                ConvSpec::Bottleneck {
                    filters,
                    stride,
                    projection,
                } => {
                    let b = Bottleneck::new(&mut rng, c, filters, stride, projection);
                    c = filters[2];
                    ConvLayer::Bottleneck(Box::new(b))
                }
                ConvSpec::GlobalAvgPool => ConvLayer::GlobalAvgPool(GlobalAvgPool::default()),
            });
        }
        // The network input needs no gradient.
        if let Some(ConvLayer::Conv(first)) = conv.first_mut() {
            first.input_grad = false;
        }
        let mut f = cx.flat_features;
        let mut seq = Vec::with_capacity(spec.seq.len());
        for layer in &spec.seq {
            seq.push(match *layer {
                SeqSpec::Lstm { units, bidirectional } | SeqSpec::Gru { units, bidirectional } => {
                    let kind = if matches!(layer, SeqSpec::Lstm { .. }) {
                        CellKind::Lstm
                    } else {
                        CellKind::Gru
                    };
                    let l = Recurrent::new(&mut rng, kind, f, units, bidirectional);
                    f = if bidirectional { 2 * units } else { units };
                    SeqLayer::Recurrent(l)
                }
                SeqSpec::Dense { units } => {
                    let l = Dense::new(&mut rng, f, units);
                    f = units;
                    SeqLayer::Dense(l)
                }
                SeqSpec::TemporalConv { filters, kernel } => {
                    let l = TemporalConv::new(&mut rng, f, filters, kernel);
                    f = filters;
                    SeqLayer::TemporalConv(l)
                }
                SeqSpec::Relu => SeqLayer::Act(Act::new(Activation::Relu)),
                SeqSpec::Sigmoid => SeqLayer::Act(Act::new(Activation::Sigmoid)),
                SeqSpec::Softmax => SeqLayer::Act(Act::new(Activation::Softmax)),
            });
        }
        Ok(Network {
            spec: spec.clone(),
            conv,
            seq,
            conv_out: Vec::new(),
        })
    }

    pub fn spec(&self) -> &ArchSpec {
        &self.spec
    }

    fn check_input(&self, x: &Tensor<S>, lengths: &[usize]) -> Result<()> {
        let [c, h, w] = self.spec.input;
        if x.shape.len() != 5 || x.shape[1] != c || x.shape[3] != h || x.shape[4] != w {
            return Err(Error::InvalidArgument(format!(
                "input shape {:?} does not match [batch, {c}, frames, {h}, {w}]",
                x.shape
            )));
        }
        if lengths.len() != x.shape[0] || lengths.iter().any(|&l| l > x.shape[2]) {
            return Err(Error::InvalidArgument("item lengths do not match the batch".into()));
        }
        Ok(())
    }

    /// Maps `[batch, channel, frame, row, col]` to `[batch, frame, output]`.
    pub fn forward(&mut self, x: Tensor<S>, lengths: &[usize], train: bool) -> Result<Tensor<S>> {
        self.check_input(&x, lengths)?;
        let ctx = Ctx { lengths, train };
        let mut y = x;
        for l in &mut self.conv {
            y = l.forward(y, &ctx);
        }
        self.conv_out = y.shape.clone();
        let mut z = flatten(&y);
        for l in &mut self.seq {
            z = l.forward(z, &ctx);
        }
        Ok(z)
    }

    /// Inference without caching activations.
    pub fn predict(&mut self, x: Tensor<S>, lengths: &[usize]) -> Result<Tensor<S>> {
        self.forward(x, lengths, false)
    }

    /// Accumulates parameter gradients for the last training-mode forward pass.
    pub fn backward(&mut self, dy: Tensor<S>, lengths: &[usize]) {
        let ctx = Ctx { lengths, train: true };
        let mut d = dy;
        for l in self.seq.iter_mut().rev() {
            d = l.backward(d, &ctx);
        }
        let mut d = unflatten(&d, &self.conv_out);
        for l in self.conv.iter_mut().rev() {
            match l.backward(d, &ctx) {
                Some(next) => d = next,
                None => break,
            }
        }
    }

    fn visit(&mut self, f: &mut dyn FnMut(&mut Param<S>)) {
        self.conv.iter_mut().for_each(|l| l.visit(f));
        self.seq.iter_mut().for_each(|l| l.visit(f));
    }

    /// Calls `f` on every parameter array, in a fixed order.
    pub fn for_each_param(&mut self, mut f: impl FnMut(ParamSlot<S>)) {
        self.visit(&mut |p| {
            f(ParamSlot {
                value: &mut p.value,
                grad: &mut p.grad,
            })
        });
    }

    pub fn zero_grad(&mut self) {
        self.visit(&mut |p| p.grad.fill(S::zero()));
    }

    /// Number of trainable scalars held by the built layers.
    pub fn count_parameters(&mut self) -> usize {
        let mut n = 0;
        self.visit(&mut |p| n += p.value.len());
        n
    }

    /// All parameters followed by batch-norm running statistics.
    pub fn export_weights(&mut self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |p| out.extend(p.value.iter().map(|v| v.as_f64())));
        for l in &mut self.conv {
            l.visit_buffers(&mut |b| out.extend(b.iter().map(|v| v.as_f64())));
        }
        out
    }

    pub fn import_weights(&mut self, w: &[f64]) -> Result<()> {
        let mut expected = 0;
        self.visit(&mut |p| expected += p.value.len());
        for l in &mut self.conv {
            l.visit_buffers(&mut |b| expected += b.len());
        }
        if expected != w.len() {
            return Err(Error::InvalidArgument(format!(
                "weight blob has {} values, network needs {expected}",
                w.len()
            )));
        }
        let mut at = 0;
        let mut take = |dst: &mut [S]| {
            for v in dst.iter_mut() {
                *v = S::from_f64(w[at]);
                at += 1;
            }
        };
        self.visit(&mut |p| take(&mut p.value));
        for l in &mut self.conv {
            l.visit_buffers(&mut |b| take(b.as_mut_slice()));
        }
        Ok(())
    }
}

fn flatten<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let [n, c, t, h, w] = [x.shape[0], x.shape[1], x.shape[2], x.shape[3], x.shape[4]];
    let p = h * w;
    let mut out = Tensor::zeros(&[n, t, c * p]);
    for i in 0..n {
        for ch in 0..c {
            for f in 0..t {
                let src = ((i * c + ch) * t + f) * p;
                let dst = (i * t + f) * c * p + ch * p;
                out.data[dst..dst + p].copy_from_slice(&x.data[src..src + p]);
            }
        }
    }
    out
}

fn unflatten<S: Scalar>(d: &Tensor<S>, shape: &[usize]) -> Tensor<S> {
    let [n, c, t, h, w] = [shape[0], shape[1], shape[2], shape[3], shape[4]];
    let p = h * w;
    let mut out = Tensor::zeros(shape);
    for i in 0..n {
        for ch in 0..c {
            for f in 0..t {
                let dst = ((i * c + ch) * t + f) * p;
                let src = (i * t + f) * c * p + ch * p;
                out.data[dst..dst + p].copy_from_slice(&d.data[src..src + p]);
            }
        }
    }
    out
}
