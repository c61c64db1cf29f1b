//! Convolutional-stage layers on `[batch, channel, frame, row, col]` tensors.

use rand_chacha::ChaCha8Rng;

use super::init::glorot_uniform;
use super::{gemm, mat, mat_t, Ctx, Scalar, Tensor};

/// A learnable array with its gradient.
#[derive(Clone, Debug)]
pub(crate) struct Param<S> {
    pub value: Vec<S>,
    pub grad: Vec<S>,
}

impl<S: Scalar> Param<S> {
    pub fn new(value: Vec<S>) -> Self {
        let grad = vec![S::zero(); value.len()];
        Param { value, grad }
    }

    pub fn zeros(n: usize) -> Self {
        Param::new(vec![S::zero(); n])
    }
}

pub(crate) type ParamVisitor<'a, S> = dyn FnMut(&mut Param<S>) + 'a;

fn dims5(t: &Tensor<impl Copy>) -> [usize; 5] {
    [t.shape[0], t.shape[1], t.shape[2], t.shape[3], t.shape[4]]
}

#[derive(Clone, Debug)]
pub(crate) struct Conv3d<S> {
    cin: usize,
    cout: usize,
    kernel: [usize; 3],
    stride: usize,
    pad: [usize; 2],
    pub weight: Param<S>,
    pub bias: Param<S>,
    pub input_grad: bool,
    input: Option<Tensor<S>>,
}

impl<S: Scalar> Conv3d<S> {
    pub fn new(
        rng: &mut ChaCha8Rng,
        cin: usize,
        cout: usize,
        kernel: [usize; 3],
        stride: usize,
        pad: [usize; 2],
    ) -> Self {
        let k: usize = kernel.iter().product();
        Conv3d {
            cin,
            cout,
            kernel,
            stride,
            pad,
            weight: Param::new(glorot_uniform(rng, cout * cin * k, cin * k, cout * k)),
            bias: Param::zeros(cout),
            input_grad: true,
            input: None,
        }
    }

    fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let s = self.stride;
        (
            (h + 2 * self.pad[0] - self.kernel[1]) / s + 1,
            (w + 2 * self.pad[1] - self.kernel[2]) / s + 1,
        )
    }

    fn k_rows(&self) -> usize {
        self.cin * self.kernel.iter().product::<usize>()
    }

    /// Fills `cols` (`[K × Ho·Wo]`) for output frame `t` of item `n`.
    fn im2col(&self, x: &Tensor<S>, n: usize, t: usize, len: usize, cols: &mut [S]) {
        let [_, _, tt, h, w] = dims5(x);
        let (ho, wo) = self.out_hw(h, w);
        let p = ho * wo;
        let [kt, kh, kw] = self.kernel;
        let half = kt / 2;
        let s = self.stride;
        let (ph, pw) = (self.pad[0] as isize, self.pad[1] as isize);
        let mut r = 0;
        for ci in 0..self.cin {
            for dt in 0..kt {
                let src_t = (t + dt) as isize - half as isize;
                let frame_ok = src_t >= 0 && (src_t as usize) < len;
                let base = ((n * self.cin + ci) * tt + src_t.max(0) as usize) * h * w;
                for dy in 0..kh {
                    for dx in 0..kw {
                        let row = &mut cols[r * p..(r + 1) * p];
                        r += 1;
                        if !frame_ok {
                            row.fill(S::zero());
                            continue;
                        }
                        let img = &x.data[base..base + h * w];
                        for oy in 0..ho {
                            let iy = (oy * s + dy) as isize - ph;
                            let out = &mut row[oy * wo..(oy + 1) * wo];
                            if iy < 0 || iy as usize >= h {
                                out.fill(S::zero());
                                continue;
                            }
                            let src = &img[iy as usize * w..(iy as usize + 1) * w];
                            let off = dx as isize - pw;
                            if s == 1 {
                                // Valid output columns satisfy 0 <= ox + off < w.
                                let lo = (-off).clamp(0, wo as isize) as usize;
                                let hi = (w as isize - off).clamp(0, wo as isize) as usize;
                                out[..lo].fill(S::zero());
                                if hi > lo {
                                    let a = (lo as isize + off) as usize;
                                    out[lo..hi].copy_from_slice(&src[a..a + hi - lo]);
                                }
                                out[hi.max(lo)..].fill(S::zero());
                            } else {
                                for (ox, o) in out.iter_mut().enumerate() {
                                    let ix = (ox * s) as isize + off;
                                    *o = if ix >= 0 && (ix as usize) < w { src[ix as usize] } else { S::zero() };
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds `cols` back into `dx` (inverse of [`Self::im2col`]).
    fn col2im(&self, dx: &mut Tensor<S>, n: usize, t: usize, len: usize, cols: &[S]) {
        let [_, _, tt, h, w] = dims5(dx);
        let (ho, wo) = self.out_hw(h, w);
        let p = ho * wo;
        let [kt, kh, kw] = self.kernel;
        let half = kt / 2;
        let s = self.stride;
        let (ph, pw) = (self.pad[0] as isize, self.pad[1] as isize);
        let mut r = 0;
        for ci in 0..self.cin {
            for dt in 0..kt {
                let src_t = (t + dt) as isize - half as isize;
                let frame_ok = src_t >= 0 && (src_t as usize) < len;
                let base = ((n * self.cin + ci) * tt + src_t.max(0) as usize) * h * w;
                for dy in 0..kh {
                    for dxk in 0..kw {
                        let row = &cols[r * p..(r + 1) * p];
                        r += 1;
                        if !frame_ok {
                            continue;
                        }
                        for oy in 0..ho {
                            let iy = (oy * s + dy) as isize - ph;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            let dst = base + iy as usize * w;
                            for ox in 0..wo {
                                let ix = (ox * s + dxk) as isize - pw;
                                if ix >= 0 && (ix as usize) < w {
                                    dx.data[dst + ix as usize] += row[oy * wo + ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, c, t, h, w] = dims5(&x);
        assert_eq!(c, self.cin, "conv input channels");
        let (ho, wo) = self.out_hw(h, w);
        let p = ho * wo;
        let k = self.k_rows();
        let mut out = Tensor::zeros(&[n, self.cout, t, ho, wo]);
        let mut cols = vec![S::zero(); k * p];
        for i in 0..n {
            for f in 0..ctx.lengths[i].min(t) {
                self.im2col(&x, i, f, ctx.lengths[i].min(t), &mut cols);
                let off = (i * self.cout * t + f) * p;
                gemm(
                    self.cout,
                    k,
                    p,
                    mat(&self.weight.value, k),
                    mat(&cols, p),
                    S::zero(),
                    &mut out.data[off..],
                    t * p,
                );
                for co in 0..self.cout {
                    let b = self.bias.value[co];
                    let o = off + co * t * p;
                    out.data[o..o + p].iter_mut().for_each(|v| *v += b);
                }
            }
        }
        if ctx.train {
            self.input = Some(x);
        }
        out
    }

    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Option<Tensor<S>> {
        let x = self.input.take().expect("conv backward without forward");
        let [n, _, t, h, w] = dims5(&x);
        let (ho, wo) = self.out_hw(h, w);
        let p = ho * wo;
        let k = self.k_rows();
        let mut cols = vec![S::zero(); k * p];
        let mut dcols = vec![S::zero(); k * p];
        let mut dx = self.input_grad.then(|| Tensor::zeros(&x.shape));
        for i in 0..n {
            let len = ctx.lengths[i].min(t);
            for f in 0..len {
                let off = (i * self.cout * t + f) * p;
                self.im2col(&x, i, f, len, &mut cols);
                gemm(
                    self.cout,
                    p,
                    k,
                    mat(&dy.data[off..], t * p),
                    mat_t(&cols, p),
                    S::one(),
                    &mut self.weight.grad,
                    k,
                );
                for co in 0..self.cout {
                    let o = off + co * t * p;
                    let s: S = dy.data[o..o + p].iter().copied().sum();
                    self.bias.grad[co] += s;
                }
                if let Some(dx) = dx.as_mut() {
                    gemm(
                        k,
                        self.cout,
                        p,
                        mat_t(&self.weight.value, k),
                        mat(&dy.data[off..], t * p),
                        S::zero(),
                        &mut dcols,
                        p,
                    );
                    self.col2im(dx, i, f, len, &dcols);
                }
            }
        }
        dx
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Batch normalisation over `(batch, frame, row, col)` per channel, using
/// valid frames only.
#[derive(Clone, Debug)]
pub(crate) struct BatchNorm<S> {
    pub gamma: Param<S>,
    pub beta: Param<S>,
    pub running_mean: Vec<S>,
    pub running_var: Vec<S>,
    momentum: f64,
    eps: f64,
    x_hat: Vec<S>,
    inv_std: Vec<S>,
    trained: bool,
}

impl<S: Scalar> BatchNorm<S> {
    pub fn new(c: usize) -> Self {
        BatchNorm {
            gamma: Param::new(vec![S::one(); c]),
            beta: Param::zeros(c),
            running_mean: vec![S::zero(); c],
            running_var: vec![S::one(); c],
            momentum: 0.9,
            eps: 1e-3,
            x_hat: Vec::new(),
            inv_std: Vec::new(),
            trained: false,
        }
    }

    pub fn forward(&mut self, mut x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, c, t, h, w] = dims5(&x);
        let hw = h * w;
        let count: usize = ctx.lengths.iter().map(|&l| l.min(t)).sum::<usize>() * hw;
        let eps = S::from_f64(self.eps);
        let mut inv_std = vec![S::zero(); c];
        let mut means = vec![S::zero(); c];
        for ch in 0..c {
            let (mean, var) = if ctx.train && count > 0 {
                let mut sum = 0.0f64;
                let mut sq = 0.0f64;
                for i in 0..n {
                    let o = (i * c + ch) * t * hw;
                    for &v in &x.data[o..o + ctx.lengths[i].min(t) * hw] {
                        let v = v.as_f64();
                        sum += v;
                        sq += v * v;
                    }
                }
                let mean = sum / count as f64;
                let var = (sq / count as f64 - mean * mean).max(0.0);
                let m = self.momentum;
                self.running_mean[ch] = S::from_f64(m * self.running_mean[ch].as_f64() + (1.0 - m) * mean);
                self.running_var[ch] = S::from_f64(m * self.running_var[ch].as_f64() + (1.0 - m) * var);
                (S::from_f64(mean), S::from_f64(var))
            } else {
                (self.running_mean[ch], self.running_var[ch])
            };
            means[ch] = mean;
            inv_std[ch] = S::one() / (var + eps).sqrt();
        }
        for i in 0..n {
            let len = ctx.lengths[i].min(t);
            for ch in 0..c {
                let o = (i * c + ch) * t * hw;
                let (m, s) = (means[ch], inv_std[ch]);
                for v in &mut x.data[o..o + len * hw] {
                    *v = (*v - m) * s;
                }
                x.data[o + len * hw..o + t * hw].fill(S::zero());
            }
        }
        if ctx.train {
            self.x_hat = x.data.clone();
            self.inv_std = inv_std;
            self.trained = true;
        }
        for i in 0..n {
            let len = ctx.lengths[i].min(t);
            for ch in 0..c {
                let o = (i * c + ch) * t * hw;
                let (g, b) = (self.gamma.value[ch], self.beta.value[ch]);
                for v in &mut x.data[o..o + len * hw] {
                    *v = *v * g + b;
                }
            }
        }
        x
    }

    pub fn backward(&mut self, mut dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, c, t, h, w] = dims5(&dy);
        let hw = h * w;
        let count: usize = ctx.lengths.iter().map(|&l| l.min(t)).sum::<usize>() * hw;
        let m = S::from_f64(count as f64);
        for ch in 0..c {
            let mut dg = S::zero();
            let mut db = S::zero();
            for i in 0..n {
                let o = (i * c + ch) * t * hw;
                let len = ctx.lengths[i].min(t) * hw;
                for (d, xh) in dy.data[o..o + len].iter().zip(&self.x_hat[o..o + len]) {
                    dg += *d * *xh;
                    db += *d;
                }
            }
            self.gamma.grad[ch] += dg;
            self.beta.grad[ch] += db;
            let scale = self.gamma.value[ch] * self.inv_std[ch];
            for i in 0..n {
                let o = (i * c + ch) * t * hw;
                let len = ctx.lengths[i].min(t) * hw;
                for (d, xh) in dy.data[o..o + len].iter_mut().zip(&self.x_hat[o..o + len]) {
                    *d = if ctx.train {
                        scale * (*d - (db + *xh * dg) / m)
                    } else {
                        scale * *d
                    };
                }
                dy.data[o + len..o + t * hw].fill(S::zero());
            }
        }
        self.x_hat = Vec::new();
        dy
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward<S: Scalar>(&mut self, mut x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        if ctx.train {
            self.mask = x.data.iter().map(|&v| v > S::zero()).collect();
        }
        x.data.iter_mut().for_each(|v| *v = v.max(S::zero()));
        x
    }

    pub fn backward<S: Scalar>(&mut self, mut dy: Tensor<S>) -> Tensor<S> {
        for (d, &m) in dy.data.iter_mut().zip(&self.mask) {
            if !m {
                *d = S::zero();
            }
        }
        self.mask = Vec::new();
        dy
    }
}

#[derive(Clone, Debug)]
pub(crate) struct MaxPool {
    window: [usize; 2],
    stride: usize,
    pad: usize,
    argmax: Vec<u32>,
    in_shape: Vec<usize>,
}

impl MaxPool {
    pub fn new(window: [usize; 2], stride: usize, pad: usize) -> Self {
        MaxPool {
            window,
            stride,
            pad,
            argmax: Vec::new(),
            in_shape: Vec::new(),
        }
    }

    pub fn forward<S: Scalar>(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, c, t, h, w] = dims5(&x);
        let s = self.stride;
        let ho = (h + 2 * self.pad - self.window[0]) / s + 1;
        let wo = (w + 2 * self.pad - self.window[1]) / s + 1;
        let mut out = Tensor::zeros(&[n, c, t, ho, wo]);
        let mut argmax = vec![u32::MAX; out.data.len()];
        for i in 0..n {
            for ch in 0..c {
                for f in 0..ctx.lengths[i].min(t) {
                    let ib = ((i * c + ch) * t + f) * h * w;
                    let ob = ((i * c + ch) * t + f) * ho * wo;
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut best = S::neg_infinity();
                            let mut at = u32::MAX;
                            for dy in 0..self.window[0] {
                                let iy = (oy * s + dy) as isize - self.pad as isize;
                                if iy < 0 || iy as usize >= h {
                                    continue;
                                }
                                for dx in 0..self.window[1] {
                                    let ix = (ox * s + dx) as isize - self.pad as isize;
                                    if ix < 0 || ix as usize >= w {
                                        continue;
                                    }
                                    let idx = ib + iy as usize * w + ix as usize;
                                    if x.data[idx] > best {
                                        best = x.data[idx];
                                        at = idx as u32;
                                    }
                                }
                            }
                            out.data[ob + oy * wo + ox] = best;
                            argmax[ob + oy * wo + ox] = at;
                        }
                    }
                }
            }
        }
        if ctx.train {
            self.argmax = argmax;
            self.in_shape = x.shape.clone();
        }
        out
    }

    pub fn backward<S: Scalar>(&mut self, dy: Tensor<S>) -> Tensor<S> {
        let mut dx = Tensor::zeros(&self.in_shape);
        for (&d, &a) in dy.data.iter().zip(&self.argmax) {
            if a != u32::MAX {
                dx.data[a as usize] += d;
            }
        }
        self.argmax = Vec::new();
        dx
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct GlobalAvgPool {
    in_shape: Vec<usize>,
}

impl GlobalAvgPool {
    pub fn forward<S: Scalar>(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, c, t, h, w] = dims5(&x);
        let hw = h * w;
        let scale = S::from_f64(1.0 / hw as f64);
        let mut out = Tensor::zeros(&[n, c, t, 1, 1]);
        for (o, chunk) in out.data.iter_mut().zip(x.data.chunks(hw)) {
            *o = chunk.iter().copied().sum::<S>() * scale;
        }
        if ctx.train {
            self.in_shape = x.shape;
        }
        out
    }

    pub fn backward<S: Scalar>(&mut self, dy: Tensor<S>) -> Tensor<S> {
        let hw = self.in_shape[3] * self.in_shape[4];
        let scale = S::from_f64(1.0 / hw as f64);
        let mut dx = Tensor::zeros(&self.in_shape);
        for (chunk, &d) in dx.data.chunks_mut(hw).zip(&dy.data) {
            chunk.fill(d * scale);
        }
        dx
    }
}

/// Residual bottleneck block.
#[derive(Clone, Debug)]
pub(crate) struct Bottleneck<S> {
    pub main: Vec<ConvLayer<S>>,
    pub shortcut: Vec<ConvLayer<S>>,
    out_relu: Relu,
}

impl<S: Scalar> Bottleneck<S> {
    pub fn new(rng: &mut ChaCha8Rng, cin: usize, filters: [usize; 3], stride: usize, projection: bool) -> Self {
        let main = vec![
            ConvLayer::Conv(Conv3d::new(rng, cin, filters[0], [1, 1, 1], stride, [0, 0])),
            ConvLayer::BatchNorm(BatchNorm::new(filters[0])),
            ConvLayer::Relu(Relu::default()),
            ConvLayer::Conv(Conv3d::new(rng, filters[0], filters[1], [1, 3, 3], 1, [1, 1])),
            ConvLayer::BatchNorm(BatchNorm::new(filters[1])),
            ConvLayer::Relu(Relu::default()),
            ConvLayer::Conv(Conv3d::new(rng, filters[1], filters[2], [1, 1, 1], 1, [0, 0])),
            ConvLayer::BatchNorm(BatchNorm::new(filters[2])),
        ];
        let shortcut = if projection {
            vec![
                ConvLayer::Conv(Conv3d::new(rng, cin, filters[2], [1, 1, 1], stride, [0, 0])),
                ConvLayer::BatchNorm(BatchNorm::new(filters[2])),
            ]
        } else {
            Vec::new()
        };
        Bottleneck {
            main,
            shortcut,
            out_relu: Relu::default(),
        }
    }

    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let short = if self.shortcut.is_empty() {
            x.clone()
        } else {
            forward_all(&mut self.shortcut, x.clone(), ctx)
        };
        let mut y = forward_all(&mut self.main, x, ctx);
        y.data.iter_mut().zip(&short.data).for_each(|(a, &b)| *a += b);
        self.out_relu.forward(y, ctx)
    }

    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let d = self.out_relu.backward(dy);
        let mut dx = backward_all(&mut self.main, d.clone(), ctx).expect("inner layers return gradients");
        let ds = if self.shortcut.is_empty() {
            d
        } else {
            backward_all(&mut self.shortcut, d, ctx).expect("inner layers return gradients")
        };
        dx.data.iter_mut().zip(&ds.data).for_each(|(a, &b)| *a += b);
        dx
    }
}

#[derive(Clone, Debug)]
pub(crate) enum ConvLayer<S> {
    Conv(Conv3d<S>),
    BatchNorm(BatchNorm<S>),
    Relu(Relu),
    MaxPool(MaxPool),
    Bottleneck(Box<Bottleneck<S>>),
    GlobalAvgPool(GlobalAvgPool),
}

impl<S: Scalar> ConvLayer<S> {
    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        match self {
            ConvLayer::Conv(l) => l.forward(x, ctx),
            ConvLayer::BatchNorm(l) => l.forward(x, ctx),
            ConvLayer::Relu(l) => l.forward(x, ctx),
            ConvLayer::MaxPool(l) => l.forward(x, ctx),
            ConvLayer::Bottleneck(l) => l.forward(x, ctx),
            ConvLayer::GlobalAvgPool(l) => l.forward(x, ctx),
        }
    }

    /// Returns `None` only for a convolution with input gradients disabled.
    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Option<Tensor<S>> {
        match self {
            ConvLayer::Conv(l) => l.backward(dy, ctx),
            ConvLayer::BatchNorm(l) => Some(l.backward(dy, ctx)),
            ConvLayer::Relu(l) => Some(l.backward(dy)),
            ConvLayer::MaxPool(l) => Some(l.backward(dy)),
            ConvLayer::Bottleneck(l) => Some(l.backward(dy, ctx)),
            ConvLayer::GlobalAvgPool(l) => Some(l.backward(dy)),
        }
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        match self {
            ConvLayer::Conv(l) => l.visit(f),
            ConvLayer::BatchNorm(l) => l.visit(f),
            ConvLayer::Bottleneck(b) => {
                b.main.iter_mut().for_each(|l| l.visit(f));
                b.shortcut.iter_mut().for_each(|l| l.visit(f));
            }
            _ => {}
        }
    }

    /// Batch-norm running statistics, in a fixed order.
    pub fn visit_buffers(&mut self, f: &mut dyn FnMut(&mut Vec<S>)) {
        match self {
            ConvLayer::BatchNorm(l) => {
                f(&mut l.running_mean);
                f(&mut l.running_var);
            }
            ConvLayer::Bottleneck(b) => {
                b.main.iter_mut().for_each(|l| l.visit_buffers(f));
                b.shortcut.iter_mut().for_each(|l| l.visit_buffers(f));
            }
            _ => {}
        }
    }
}

pub(crate) fn forward_all<S: Scalar>(layers: &mut [ConvLayer<S>], mut x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
    for l in layers {
        x = l.forward(x, ctx);
    }
    x
}

pub(crate) fn backward_all<S: Scalar>(layers: &mut [ConvLayer<S>], mut dy: Tensor<S>, ctx: &Ctx) -> Option<Tensor<S>> {
    for l in layers.iter_mut().rev() {
        dy = l.backward(dy, ctx)?;
    }
    Some(dy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn naive_conv(c: &Conv3d<f64>, x: &Tensor<f64>, lengths: &[usize]) -> Tensor<f64> {
        let [n, cin, t, h, w] = dims5(x);
        let (ho, wo) = c.out_hw(h, w);
        let [kt, kh, kw] = c.kernel;
        let mut out = Tensor::zeros(&[n, c.cout, t, ho, wo]);
        for i in 0..n {
            for co in 0..c.cout {
                for f in 0..lengths[i] {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut acc = c.bias.value[co];
                            for ci in 0..cin {
                                for dt in 0..kt {
                                    let tt = f as isize + dt as isize - (kt / 2) as isize;
                                    if tt < 0 || tt as usize >= lengths[i] {
                                        continue;
                                    }
                                    for dy in 0..kh {
                                        for dx in 0..kw {
                                            let iy = (oy * c.stride + dy) as isize - c.pad[0] as isize;
                                            let ix = (ox * c.stride + dx) as isize - c.pad[1] as isize;
                                            if iy < 0 || ix < 0 || iy as usize >= h || ix as usize >= w {
                                                continue;
                                            }
                                            let wi = (((co * cin + ci) * kt + dt) * kh + dy) * kw + dx;
                                            let xi = (((i * cin + ci) * t + tt as usize) * h + iy as usize) * w
                                                + ix as usize;
                                            acc += c.weight.value[wi] * x.data[xi];
                                        }
                                    }
                                }
                            }
                            out.data[(((i * c.cout + co) * t + f) * ho + oy) * wo + ox] = acc;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (stride, pad, kernel) in [(1, [1, 2], [3, 3, 5]), (2, [3, 3], [1, 7, 7]), (2, [0, 0], [3, 1, 1])] {
            let mut c = Conv3d::<f64>::new(&mut rng, 2, 3, kernel, stride, pad);
            c.bias.value = vec![0.1, -0.2, 0.3];
            let data: Vec<f64> = (0..2 * 2 * 4 * 9 * 8).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
            let x = Tensor::from_vec(&[2, 2, 4, 9, 8], data);
            let lengths = [4, 3];
            let ctx = Ctx {
                lengths: &lengths,
                train: false,
            };
            let fast = c.forward(x.clone(), &ctx);
            let slow = naive_conv(&c, &x, &lengths);
            assert_eq!(fast.shape, slow.shape);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batch_norm_ignores_padding() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor::from_vec(&[2, 1, 2, 1, 1], vec![1.0, 3.0, 5.0, 100.0]);
        let ctx = Ctx {
            lengths: &[2, 1],
            train: true,
        };
        let y = bn.forward(x, &ctx);
        let inv = 1.0 / (8.0f64 / 3.0 + 1e-3).sqrt();
        let expect = [-2.0 * inv, 0.0, 2.0 * inv, 0.0];
        for (a, b) in y.data.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
