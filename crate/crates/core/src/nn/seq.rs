//! Sequence-stage layers on `[batch, frame, feature]` tensors.

use rand_chacha::ChaCha8Rng;

use super::conv::{Param, ParamVisitor};
use super::init::{glorot_uniform, orthogonal};
use super::{gemm, mat, mat_t, sigmoid, Ctx, Scalar, Tensor};

fn dims3(t: &Tensor<impl Copy>) -> [usize; 3] {
    [t.shape[0], t.shape[1], t.shape[2]]
}

/// Reverses each item's valid frames in place of order; padding stays zero.
fn reverse_within<S: Scalar>(x: &Tensor<S>, lengths: &[usize]) -> Tensor<S> {
    let [n, t, f] = dims3(x);
    let mut out = Tensor::zeros(&x.shape);
    for i in 0..n {
        let len = lengths[i].min(t);
        for s in 0..len {
            let src = (i * t + s) * f;
            let dst = (i * t + len - 1 - s) * f;
            out.data[dst..dst + f].copy_from_slice(&x.data[src..src + f]);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum CellKind {
    Lstm,
    Gru,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

/// One direction of a recurrent layer (Keras gate layouts: LSTM `i f c o`,
/// GRU `z r h` with the reset gate applied after the recurrent product).
#[derive(Clone, Debug)]
pub(crate) struct RnnDir<S> {
    kind: CellKind,
    input: usize,
    units: usize,
    pub kernel: Param<S>,
    pub recurrent: Param<S>,
    /// LSTM: `[4H]`. GRU: `[3H input | 3H recurrent]`.
    pub bias: Param<S>,
    x: Vec<S>,
    /// LSTM: activated gates. GRU: activated `z, r, h̃`.
    gates: Vec<S>,
    /// LSTM: cell states. GRU: recurrent candidate term `h·U_h + b_h`.
    aux: Vec<S>,
    hs: Vec<S>,
    shape: [usize; 2],
}

impl<S: Scalar> RnnDir<S> {
    pub fn new(rng: &mut ChaCha8Rng, kind: CellKind, input: usize, units: usize) -> Self {
        let g = kind.gates() * units;
        let bias = match kind {
            CellKind::Lstm => {
                let mut b = vec![S::zero(); g];
                b[units..2 * units].fill(S::one());
                b
            }
            CellKind::Gru => vec![S::zero(); 2 * g],
        };
        RnnDir {
            kind,
            input,
            units,
            kernel: Param::new(glorot_uniform(rng, input * g, input, g)),
            recurrent: Param::new(orthogonal(rng, units, g)),
            bias: Param::new(bias),
            x: Vec::new(),
            gates: Vec::new(),
            aux: Vec::new(),
            hs: Vec::new(),
            shape: [0, 0],
        }
    }

    pub fn forward(&mut self, x: &Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t, i_dim] = dims3(x);
        assert_eq!(i_dim, self.input, "recurrent input width");
        let h_dim = self.units;
        let g = self.kind.gates() * h_dim;
        let mut xz = vec![S::zero(); n * t * g];
        gemm(n * t, i_dim, g, mat(&x.data, i_dim), mat(&self.kernel.value, g), S::zero(), &mut xz, g);
        for row in xz.chunks_mut(g) {
            row.iter_mut().zip(&self.bias.value[..g]).for_each(|(v, &b)| *v += b);
        }
        let mut gates = vec![S::zero(); n * t * g];
        let mut aux = vec![S::zero(); n * t * h_dim];
        let mut hs = vec![S::zero(); n * t * h_dim];
        let mut h = vec![S::zero(); n * h_dim];
        let mut c = vec![S::zero(); n * h_dim];
        let mut hz = vec![S::zero(); n * g];
        for step in 0..t {
            gemm(n, h_dim, g, mat(&h, h_dim), mat(&self.recurrent.value, g), S::zero(), &mut hz, g);
            for b in 0..n {
                if step >= ctx.lengths[b] {
                    continue;
                }
                let row = (b * t + step) * g;
                let hrow = (b * t + step) * h_dim;
                let zx = &xz[row..row + g];
                let zh = &hz[b * g..(b + 1) * g];
                let hb = &mut h[b * h_dim..(b + 1) * h_dim];
                match self.kind {
                    CellKind::Lstm => {
                        let cb = &mut c[b * h_dim..(b + 1) * h_dim];
                        for u in 0..h_dim {
                            let ig = sigmoid(zx[u] + zh[u]);
                            let fg = sigmoid(zx[h_dim + u] + zh[h_dim + u]);
                            let cg = (zx[2 * h_dim + u] + zh[2 * h_dim + u]).tanh();
                            let og = sigmoid(zx[3 * h_dim + u] + zh[3 * h_dim + u]);
                            let cn = fg * cb[u] + ig * cg;
                            cb[u] = cn;
                            hb[u] = og * cn.tanh();
                            gates[row + u] = ig;
                            gates[row + h_dim + u] = fg;
                            gates[row + 2 * h_dim + u] = cg;
                            gates[row + 3 * h_dim + u] = og;
                            aux[hrow + u] = cn;
                        }
                    }
                    CellKind::Gru => {
                        let br = &self.bias.value[g..];
                        for u in 0..h_dim {
                            let z = sigmoid(zx[u] + zh[u] + br[u]);
                            let r = sigmoid(zx[h_dim + u] + zh[h_dim + u] + br[h_dim + u]);
                            let rec = zh[2 * h_dim + u] + br[2 * h_dim + u];
                            let cand = (zx[2 * h_dim + u] + r * rec).tanh();
                            hb[u] = z * hb[u] + (S::one() - z) * cand;
                            gates[row + u] = z;
                            gates[row + h_dim + u] = r;
                            gates[row + 2 * h_dim + u] = cand;
                            aux[hrow + u] = rec;
                        }
                    }
                }
                hs[hrow..hrow + h_dim].copy_from_slice(hb);
            }
        }
        let out = Tensor::from_vec(&[n, t, h_dim], hs.clone());
        if ctx.train {
            self.x = x.data.clone();
            self.gates = gates;
            self.aux = aux;
            self.hs = hs;
            self.shape = [n, t];
        }
        out
    }

    pub fn backward(&mut self, dy: &Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t] = self.shape;
        let h_dim = self.units;
        let i_dim = self.input;
        let g = self.kind.gates() * h_dim;
        // Gradient w.r.t. the input projection (and, for GRU, separately the
        // recurrent projection, which differs in the candidate block).
        let mut dxz = vec![S::zero(); n * t * g];
        let mut dhz = match self.kind {
            CellKind::Lstm => Vec::new(),
            CellKind::Gru => vec![S::zero(); n * t * g],
        };
        let mut dh_next = vec![S::zero(); n * h_dim];
        let mut dc_next = vec![S::zero(); n * h_dim];
        let mut dh_direct = vec![S::zero(); n * h_dim];
        let one = S::one();
        for step in (0..t).rev() {
            for b in 0..n {
                let bh = b * h_dim..(b + 1) * h_dim;
                if step >= ctx.lengths[b] {
                    dc_next[bh.clone()].fill(S::zero());
                    dh_direct[bh].fill(S::zero());
                    continue;
                }
                let row = (b * t + step) * g;
                let hrow = (b * t + step) * h_dim;
                let prev = (step > 0).then(|| (b * t + step - 1) * h_dim);
                for u in 0..h_dim {
                    let dh = dy.data[hrow + u] + dh_next[b * h_dim + u];
                    let h_prev = prev.map_or(S::zero(), |p| self.hs[p + u]);
                    match self.kind {
                        CellKind::Lstm => {
                            let (ig, fg, cg, og) = (
                                self.gates[row + u],
                                self.gates[row + h_dim + u],
                                self.gates[row + 2 * h_dim + u],
                                self.gates[row + 3 * h_dim + u],
                            );
                            let c = self.aux[hrow + u];
                            let c_prev = prev.map_or(S::zero(), |p| self.aux[p + u]);
                            let tc = c.tanh();
                            let dc = dc_next[b * h_dim + u] + dh * og * (one - tc * tc);
                            dxz[row + u] = dc * cg * ig * (one - ig);
                            dxz[row + h_dim + u] = dc * c_prev * fg * (one - fg);
                            dxz[row + 2 * h_dim + u] = dc * ig * (one - cg * cg);
                            dxz[row + 3 * h_dim + u] = dh * tc * og * (one - og);
                            dc_next[b * h_dim + u] = dc * fg;
                        }
                        CellKind::Gru => {
                            let (z, r, cand) = (
                                self.gates[row + u],
                                self.gates[row + h_dim + u],
                                self.gates[row + 2 * h_dim + u],
                            );
                            let rec = self.aux[hrow + u];
                            let da = dh * (one - z) * (one - cand * cand);
                            let dz = dh * (h_prev - cand) * z * (one - z);
                            let dr = da * rec * r * (one - r);
                            dxz[row + u] = dz;
                            dxz[row + h_dim + u] = dr;
                            dxz[row + 2 * h_dim + u] = da;
                            dhz[row + u] = dz;
                            dhz[row + h_dim + u] = dr;
                            dhz[row + 2 * h_dim + u] = da * r;
                            dh_direct[b * h_dim + u] = dh * z;
                        }
                    }
                }
            }
            // dh_{t-1} = dZ_t · Uᵀ (+ the GRU direct path).
            let dz_rec = match self.kind {
                CellKind::Lstm => &dxz,
                CellKind::Gru => &dhz,
            };
            let beta = match self.kind {
                CellKind::Lstm => S::zero(),
                CellKind::Gru => {
                    dh_next.copy_from_slice(&dh_direct);
                    S::one()
                }
            };
            gemm(
                n,
                g,
                h_dim,
                mat(&dz_rec[step * g..], t * g),
                mat_t(&self.recurrent.value, g),
                beta,
                &mut dh_next,
                h_dim,
            );
        }
        let dz_rec = match self.kind {
            CellKind::Lstm => &dxz,
            CellKind::Gru => &dhz,
        };
        // Previous hidden states as a `[N·T × H]` matrix.
        let mut h_prev = vec![S::zero(); n * t * h_dim];
        for b in 0..n {
            for step in 1..t {
                let dst = (b * t + step) * h_dim;
                let src = (b * t + step - 1) * h_dim;
                h_prev[dst..dst + h_dim].copy_from_slice(&self.hs[src..src + h_dim]);
            }
        }
        gemm(i_dim, n * t, g, mat_t(&self.x, i_dim), mat(&dxz, g), S::one(), &mut self.kernel.grad, g);
        gemm(h_dim, n * t, g, mat_t(&h_prev, h_dim), mat(dz_rec, g), S::one(), &mut self.recurrent.grad, g);
        for row in dxz.chunks(g) {
            self.bias.grad[..g].iter_mut().zip(row).for_each(|(a, &b)| *a += b);
        }
        if self.kind == CellKind::Gru {
            for row in dhz.chunks(g) {
                self.bias.grad[g..].iter_mut().zip(row).for_each(|(a, &b)| *a += b);
            }
        }
        let mut dx = Tensor::zeros(&[n, t, i_dim]);
        gemm(n * t, g, i_dim, mat(&dxz, g), mat_t(&self.kernel.value, g), S::zero(), &mut dx.data, i_dim);
        self.x = Vec::new();
        self.gates = Vec::new();
        self.aux = Vec::new();
        self.hs = Vec::new();
        dx
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        f(&mut self.kernel);
        f(&mut self.recurrent);
        f(&mut self.bias);
    }
}

/// Uni- or bidirectional recurrent layer; directions are concatenated.
#[derive(Clone, Debug)]
pub(crate) struct Recurrent<S> {
    pub fwd: RnnDir<S>,
    pub bwd: Option<RnnDir<S>>,
}

impl<S: Scalar> Recurrent<S> {
    pub fn new(rng: &mut ChaCha8Rng, kind: CellKind, input: usize, units: usize, bidirectional: bool) -> Self {
        let fwd = RnnDir::new(rng, kind, input, units);
        let bwd = bidirectional.then(|| RnnDir::new(rng, kind, input, units));
        Recurrent { fwd, bwd }
    }

    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let yf = self.fwd.forward(&x, ctx);
        let Some(bwd) = self.bwd.as_mut() else {
            return yf;
        };
        let yb = reverse_within(&bwd.forward(&reverse_within(&x, ctx.lengths), ctx), ctx.lengths);
        let [n, t, h] = dims3(&yf);
        let mut out = Tensor::zeros(&[n, t, 2 * h]);
        for ((o, a), b) in out.data.chunks_mut(2 * h).zip(yf.data.chunks(h)).zip(yb.data.chunks(h)) {
            o[..h].copy_from_slice(a);
            o[h..].copy_from_slice(b);
        }
        out
    }

    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let Some(bwd) = self.bwd.as_mut() else {
            return self.fwd.backward(&dy, ctx);
        };
        let [n, t, h2] = dims3(&dy);
        let h = h2 / 2;
        let mut df = Tensor::zeros(&[n, t, h]);
        let mut db = Tensor::zeros(&[n, t, h]);
        for ((d, a), b) in dy.data.chunks(h2).zip(df.data.chunks_mut(h)).zip(db.data.chunks_mut(h)) {
            a.copy_from_slice(&d[..h]);
            b.copy_from_slice(&d[h..]);
        }
        let mut dx = self.fwd.backward(&df, ctx);
        let dxb = reverse_within(&bwd.backward(&reverse_within(&db, ctx.lengths), ctx), ctx.lengths);
        dx.data.iter_mut().zip(&dxb.data).for_each(|(a, &b)| *a += b);
        dx
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        self.fwd.visit(f);
        if let Some(b) = self.bwd.as_mut() {
            b.visit(f);
        }
    }
}

/// Per-frame affine map.
#[derive(Clone, Debug)]
pub(crate) struct Dense<S> {
    input: usize,
    units: usize,
    pub kernel: Param<S>,
    pub bias: Param<S>,
    x: Vec<S>,
}

impl<S: Scalar> Dense<S> {
    pub fn new(rng: &mut ChaCha8Rng, input: usize, units: usize) -> Self {
        Dense {
            input,
            units,
            kernel: Param::new(glorot_uniform(rng, input * units, input, units)),
            bias: Param::zeros(units),
            x: Vec::new(),
        }
    }

    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t, i] = dims3(&x);
        assert_eq!(i, self.input, "dense input width");
        let o = self.units;
        let mut y = Tensor::zeros(&[n, t, o]);
        gemm(n * t, i, o, mat(&x.data, i), mat(&self.kernel.value, o), S::zero(), &mut y.data, o);
        for row in y.data.chunks_mut(o) {
            row.iter_mut().zip(&self.bias.value).for_each(|(v, &b)| *v += b);
        }
        if ctx.train {
            self.x = x.data;
        }
        y
    }

    pub fn backward(&mut self, mut dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t, o] = dims3(&dy);
        let i = self.input;
        zero_padding(&mut dy, ctx.lengths);
        gemm(i, n * t, o, mat_t(&self.x, i), mat(&dy.data, o), S::one(), &mut self.kernel.grad, o);
        for row in dy.data.chunks(o) {
            self.bias.grad.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
        }
        let mut dx = Tensor::zeros(&[n, t, i]);
        gemm(n * t, o, i, mat(&dy.data, o), mat_t(&self.kernel.value, o), S::zero(), &mut dx.data, i);
        self.x = Vec::new();
        dx
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        f(&mut self.kernel);
        f(&mut self.bias);
    }
}

fn zero_padding<S: Scalar>(x: &mut Tensor<S>, lengths: &[usize]) {
    let [n, t, f] = dims3(x);
    for (i, &len) in lengths.iter().enumerate().take(n) {
        let len = len.min(t);
        x.data[(i * t + len) * f..(i + 1) * t * f].fill(S::zero());
    }
}

/// 1-D convolution over frames with 'same' zero padding at each item's
/// own boundaries. Weights are `[kernel][input][output]`.
#[derive(Clone, Debug)]
pub(crate) struct TemporalConv<S> {
    input: usize,
    filters: usize,
    kernel: usize,
    pub weight: Param<S>,
    pub bias: Param<S>,
    x: Vec<S>,
}

impl<S: Scalar> TemporalConv<S> {
    pub fn new(rng: &mut ChaCha8Rng, input: usize, filters: usize, kernel: usize) -> Self {
        TemporalConv {
            input,
            filters,
            kernel,
            weight: Param::new(glorot_uniform(rng, kernel * input * filters, kernel * input, kernel * filters)),
            bias: Param::zeros(filters),
            x: Vec::new(),
        }
    }

    /// Output rows `[t0, t1)` that read input row `t + j - half` inside `[0, len)`.
    fn span(&self, j: usize, len: usize) -> (usize, usize) {
        let half = self.kernel / 2;
        let t0 = half.saturating_sub(j);
        let t1 = (len + half).saturating_sub(j).min(len);
        (t0, t1.max(t0))
    }

    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t, i] = dims3(&x);
        assert_eq!(i, self.input, "temporal conv input width");
        let o = self.filters;
        let half = self.kernel / 2;
        let mut y = Tensor::zeros(&[n, t, o]);
        for b in 0..n {
            let len = ctx.lengths[b].min(t);
            for row in y.data[b * t * o..(b * t + len) * o].chunks_mut(o) {
                row.copy_from_slice(&self.bias.value);
            }
            for j in 0..self.kernel {
                let (t0, t1) = self.span(j, len);
                if t1 == t0 {
                    continue;
                }
                let src = (b * t + t0 + j - half) * i;
                gemm(
                    t1 - t0,
                    i,
                    o,
                    mat(&x.data[src..], i),
                    mat(&self.weight.value[j * i * o..(j + 1) * i * o], o),
                    S::one(),
                    &mut y.data[(b * t + t0) * o..],
                    o,
                );
            }
        }
        if ctx.train {
            self.x = x.data;
        }
        y
    }

    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let [n, t, o] = dims3(&dy);
        let i = self.input;
        let half = self.kernel / 2;
        let mut dx = Tensor::zeros(&[n, t, i]);
        for b in 0..n {
            let len = ctx.lengths[b].min(t);
            for row in dy.data[b * t * o..(b * t + len) * o].chunks(o) {
                self.bias.grad.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
            }
            for j in 0..self.kernel {
                let (t0, t1) = self.span(j, len);
                if t1 == t0 {
                    continue;
                }
                let m = t1 - t0;
                let src = (b * t + t0 + j - half) * i;
                let dyb = &dy.data[(b * t + t0) * o..];
                gemm(
                    i,
                    m,
                    o,
                    mat_t(&self.x[src..], i),
                    mat(dyb, o),
                    S::one(),
                    &mut self.weight.grad[j * i * o..(j + 1) * i * o],
                    o,
                );
                gemm(
                    m,
                    o,
                    i,
                    mat(dyb, o),
                    mat_t(&self.weight.value[j * i * o..(j + 1) * i * o], o),
                    S::one(),
                    &mut dx.data[src..],
                    i,
                );
            }
        }
        self.x = Vec::new();
        dx
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Activation {
    Relu,
    Sigmoid,
    Softmax,
}

/// Element-wise or per-frame activation; caches its output.
#[derive(Clone, Debug)]
pub(crate) struct Act<S> {
    pub kind: Activation,
    y: Vec<S>,
    width: usize,
}

impl<S: Scalar> Act<S> {
    pub fn new(kind: Activation) -> Self {
        Act {
            kind,
            y: Vec::new(),
            width: 0,
        }
    }

    pub fn forward(&mut self, mut x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        let f = x.shape[2];
        match self.kind {
            Activation::Relu => x.data.iter_mut().for_each(|v| *v = v.max(S::zero())),
            Activation::Sigmoid => x.data.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Softmax => {
                for row in x.data.chunks_mut(f) {
                    let m = row.iter().copied().fold(S::neg_infinity(), S::max);
                    row.iter_mut().for_each(|v| *v = (*v - m).exp());
                    let s: S = row.iter().copied().sum();
                    row.iter_mut().for_each(|v| *v = *v / s);
                }
            }
        }
        if ctx.train {
            self.y = x.data.clone();
            self.width = f;
        }
        x
    }

    pub fn backward(&mut self, mut dy: Tensor<S>) -> Tensor<S> {
        let one = S::one();
        match self.kind {
            Activation::Relu => dy.data.iter_mut().zip(&self.y).for_each(|(d, &y)| {
                if y <= S::zero() {
                    *d = S::zero();
                }
            }),
            Activation::Sigmoid => dy.data.iter_mut().zip(&self.y).for_each(|(d, &y)| *d = *d * y * (one - y)),
            Activation::Softmax => {
                for (d, y) in dy.data.chunks_mut(self.width).zip(self.y.chunks(self.width)) {
                    let dot: S = d.iter().zip(y).map(|(&a, &b)| a * b).sum();
                    d.iter_mut().zip(y).for_each(|(a, &b)| *a = b * (*a - dot));
                }
            }
        }
        self.y = Vec::new();
        dy
    }
}

#[derive(Clone, Debug)]
pub(crate) enum SeqLayer<S> {
    Recurrent(Recurrent<S>),
    Dense(Dense<S>),
    TemporalConv(TemporalConv<S>),
    Act(Act<S>),
}

impl<S: Scalar> SeqLayer<S> {
    pub fn forward(&mut self, x: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        match self {
            SeqLayer::Recurrent(l) => l.forward(x, ctx),
            SeqLayer::Dense(l) => l.forward(x, ctx),
            SeqLayer::TemporalConv(l) => l.forward(x, ctx),
            SeqLayer::Act(l) => l.forward(x, ctx),
        }
    }

    pub fn backward(&mut self, dy: Tensor<S>, ctx: &Ctx) -> Tensor<S> {
        match self {
            SeqLayer::Recurrent(l) => l.backward(dy, ctx),
            SeqLayer::Dense(l) => l.backward(dy, ctx),
            SeqLayer::TemporalConv(l) => l.backward(dy, ctx),
            SeqLayer::Act(l) => l.backward(dy),
        }
    }

    pub fn visit(&mut self, f: &mut ParamVisitor<S>) {
        match self {
            SeqLayer::Recurrent(l) => l.visit(f),
            SeqLayer::Dense(l) => l.visit(f),
            SeqLayer::TemporalConv(l) => l.visit(f),
            SeqLayer::Act(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn temporal_conv_respects_item_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut tc = TemporalConv::<f64>::new(&mut rng, 2, 3, 3);
        let x: Vec<f64> = (0..2 * 5 * 2).map(|v| v as f64 * 0.1).collect();
        let x = Tensor::from_vec(&[2, 5, 2], x);
        let lengths = [5, 3];
        let y = tc.forward(x.clone(), &Ctx { lengths: &lengths, train: false });
        // Direct evaluation for item 1, whose frames 3 and 4 are padding.
        for t in 0..3 {
            for o in 0..3 {
                let mut acc = tc.bias.value[o];
                for j in 0..3 {
                    let s = t as isize + j as isize - 1;
                    if !(0..3).contains(&s) {
                        continue;
                    }
                    for i in 0..2 {
                        acc += x.data[(5 + s as usize) * 2 + i] * tc.weight.value[(j * 2 + i) * 3 + o];
                    }
                }
                assert!((y.data[(5 + t) * 3 + o] - acc).abs() < 1e-12);
            }
        }
        assert!(y.data[(5 + 3) * 3..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn padded_batch_equals_single_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [CellKind::Lstm, CellKind::Gru] {
            let mut layer = Recurrent::<f64>::new(&mut rng, kind, 3, 4, true);
            let x: Vec<f64> = (0..2 * 6 * 3).map(|v| ((v * 7) % 5) as f64 * 0.2 - 0.4).collect();
            let x = Tensor::from_vec(&[2, 6, 3], x);
            let both = layer.forward(x.clone(), &Ctx { lengths: &[6, 4], train: false });
            let second = Tensor::from_vec(&[1, 4, 3], x.data[18..18 + 12].to_vec());
            let alone = layer.forward(second, &Ctx { lengths: &[4], train: false });
            for (a, b) in both.data[48..48 + 32].iter().zip(&alone.data) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!(both.data[48 + 32..].iter().all(|&v| v == 0.0));
        }
    }
}
