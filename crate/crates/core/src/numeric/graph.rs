//! Reverse-mode differentiation over an append-only computation record.
//!
//! Every operation appends a node holding its output value; node ids are
//! assigned in creation order, so inputs always precede their consumers and a
//! single reverse sweep over the id range is a valid topological traversal.

use crate::error::{Error, Result};
use crate::numeric::kernels::{self, ConvGeom, GroupStats};
use crate::numeric::tensor::Tensor;
use crate::scalar::Scalar;

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Option<Var>, geom: ConvGeom },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, S),
    Sigmoid(Var),
    Silu(Var),
    Sum(Var),
    Mean(Var),
    MaxOverChannels { input: Var, argmax: Vec<usize> },
    MeanOverChannels(Var),
    Upsample2x(Var),
    Downsample2x(Var),
    GroupNorm { input: Var, gamma: Var, beta: Var, groups: usize, stats: GroupStats<S> },
    Matmul(Var, Var),
    AddBias(Var, Var),
    Concat(Var, Var),
    Gate { input: Var, gate: Var },
    Film { input: Var, scale: Var, shift: Var },
}

#[derive(Clone, Debug)]
struct Node<S> {
    op: Op<S>,
    value: Tensor<S>,
}

/// Gradients produced by [`Graph::backward`], indexed by [`Var`].
#[derive(Clone, Debug)]
pub struct Grads<S> {
    shapes: Vec<Vec<usize>>,
    grads: Vec<Option<Vec<S>>>,
}

impl<S: Scalar> Grads<S> {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Tensor<S> {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    pub fn get_slice(&self, v: Var) -> Option<&[S]> {
        self.grads[v.0].as_deref()
    }
}

/// Computation record: values of every intermediate plus how each was made.
#[derive(Clone, Debug, Default)]
pub struct Graph<S> {
    nodes: Vec<Node<S>>,
}

fn cfg<T>(msg: String) -> Result<T> {
    Err(Error::Config(msg))
}

impl<S: Scalar> Graph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Register an input or parameter.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Leaf, value)
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    fn data(&self, v: Var) -> &[S] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return cfg(format!("{what}: shape mismatch {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn dims4(&self, v: Var) -> Result<(usize, usize, usize, usize)> {
        self.value(v).dims4()
    }

    fn binary(&mut self, a: Var, b: Var, what: &str, f: impl Fn(S, S) -> S, op: Op<S>) -> Result<Var> {
        self.same_shape(a, b, what)?;
        let out = self.value(a).zip_map(self.value(b), f)?;
        Ok(self.push(op, out))
    }

    fn unary(&mut self, a: Var, f: impl Fn(S) -> S, op: Op<S>) -> Var {
        let out = self.value(a).map(f);
        self.push(op, out)
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (batch, cin, h, w) = self.dims4(input)?;
        let (cout, kcin, kh, kw) = self.dims4(kernel)?;
        if kcin != cin {
            return cfg(format!("conv2d: input has {cin} channels, kernel expects {kcin}"));
        }
        if kh != kw || kh % 2 == 0 {
            return cfg(format!("conv2d: kernel must be square with odd size, got {kh}×{kw}"));
        }
        if stride == 0 {
            return cfg("conv2d: stride must be ≥ 1".into());
        }
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return cfg(format!("conv2d: kernel {kh} larger than padded input {h}×{w}"));
        }
        if let Some(b) = bias {
            if self.shape(b) != [cout] {
                return cfg(format!("conv2d: bias shape {:?}, expected [{cout}]", self.shape(b)));
            }
        }
        let geom = ConvGeom { batch, cin, h, w, cout, k: kh, stride, pad };
        let data = kernels::conv2d_forward(&geom, self.data(input), self.data(kernel), bias.map(|b| self.data(b)));
        let out = Tensor::new(vec![batch, cout, geom.out_h(), geom.out_w()], data)?;
        Ok(self.push(Op::Conv2d { input, kernel, bias, geom }, out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, k: S) -> Var {
        self.unary(a, |x| x * k, Op::Scale(a, k))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * sigmoid(x), Op::Silu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let s = self.value(a).mean();
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// `[B,C,H,W] → [B,1,H,W]`, maximum over channels.
    pub fn max_over_channels(&mut self, a: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(a)?;
        let hw = h * w;
        let x = self.data(a);
        let mut out = vec![S::neg_infinity(); b * hw];
        let mut argmax = vec![0usize; b * hw];
        for bi in 0..b {
            for ci in 0..c {
                let plane = &x[(bi * c + ci) * hw..(bi * c + ci + 1) * hw];
                for (j, &v) in plane.iter().enumerate() {
                    if v > out[bi * hw + j] {
                        out[bi * hw + j] = v;
                        argmax[bi * hw + j] = ci;
                    }
                }
            }
        }
        let t = Tensor::new(vec![b, 1, h, w], out)?;
        Ok(self.push(Op::MaxOverChannels { input: a, argmax }, t))
    }

    /// `[B,C,H,W] → [B,1,H,W]`, arithmetic mean over channels.
    pub fn mean_over_channels(&mut self, a: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(a)?;
        let hw = h * w;
        let x = self.data(a);
        let inv = S::one() / S::lit(c as f64);
        let mut out = vec![S::zero(); b * hw];
        for bi in 0..b {
            let dst = &mut out[bi * hw..(bi + 1) * hw];
            for ci in 0..c {
                for (d, &v) in dst.iter_mut().zip(&x[(bi * c + ci) * hw..(bi * c + ci + 1) * hw]) {
                    *d += v;
                }
            }
            dst.iter_mut().for_each(|d| *d *= inv);
        }
        let t = Tensor::new(vec![b, 1, h, w], out)?;
        Ok(self.push(Op::MeanOverChannels(a), t))
    }

    pub fn upsample_nearest_2x(&mut self, a: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(a)?;
        let x = self.data(a);
        let (oh, ow) = (2 * h, 2 * w);
        let mut out = vec![S::zero(); b * c * oh * ow];
        for p in 0..b * c {
            for y in 0..oh {
                for xx in 0..ow {
                    out[p * oh * ow + y * ow + xx] = x[p * h * w + (y / 2) * w + xx / 2];
                }
            }
        }
        let t = Tensor::new(vec![b, c, oh, ow], out)?;
        Ok(self.push(Op::Upsample2x(a), t))
    }

    pub fn downsample_avg_2x(&mut self, a: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(a)?;
        if h % 2 != 0 || w % 2 != 0 {
            return cfg(format!("downsample_avg_2x: odd spatial size {h}×{w}"));
        }
        let x = self.data(a);
        let (oh, ow) = (h / 2, w / 2);
        let q = S::lit(0.25);
        let mut out = vec![S::zero(); b * c * oh * ow];
        for p in 0..b * c {
            let src = &x[p * h * w..(p + 1) * h * w];
            for y in 0..oh {
                for xx in 0..ow {
                    let i = 2 * y * w + 2 * xx;
                    out[p * oh * ow + y * ow + xx] = (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * q;
                }
            }
        }
        let t = Tensor::new(vec![b, c, oh, ow], out)?;
        Ok(self.push(Op::Downsample2x(a), t))
    }

    /// Group normalization with per-channel affine `gamma`, `beta` of shape `[C]`.
    pub fn group_norm(&mut self, input: Var, gamma: Var, beta: Var, groups: usize, eps: S) -> Result<Var> {
        let dims = self.dims4(input)?;
        let c = dims.1;
        if groups == 0 || c % groups != 0 {
            return cfg(format!("group_norm: {c} channels not divisible into {groups} groups"));
        }
        if self.shape(gamma) != [c] || self.shape(beta) != [c] {
            return cfg(format!("group_norm: affine parameters must have shape [{c}]"));
        }
        let (out, stats) =
            kernels::group_norm_forward(self.data(input), dims, groups, self.data(gamma), self.data(beta), eps);
        let t = Tensor::new(self.shape(input).to_vec(), out)?;
        Ok(self.push(Op::GroupNorm { input, gamma, beta, groups, stats }, t))
    }

    /// `[M,K] × [K,N] → [M,N]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = match self.shape(a) {
            &[m, k] => (m, k),
            s => return cfg(format!("matmul: lhs must be rank 2, got {s:?}")),
        };
        let n = match self.shape(b) {
            &[k2, n] if k2 == k => n,
            s => return cfg(format!("matmul: rhs shape {s:?} incompatible with [{m}, {k}]")),
        };
        let mut out = vec![S::zero(); m * n];
        S::gemm(m, k, n, S::one(), self.data(a), k as isize, 1, self.data(b), n as isize, 1, S::zero(), &mut out, n as isize, 1);
        let t = Tensor::new(vec![m, n], out)?;
        Ok(self.push(Op::Matmul(a, b), t))
    }

    /// `[M,N] + [N]` with the bias repeated over rows.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let n = match self.shape(a) {
            &[_, n] => n,
            s => return cfg(format!("add_bias: input must be rank 2, got {s:?}")),
        };
        if self.shape(bias) != [n] {
            return cfg(format!("add_bias: bias shape {:?}, expected [{n}]", self.shape(bias)));
        }
        let bv = self.data(bias).to_vec();
        let mut out = self.value(a).clone();
        for row in out.data_mut().chunks_mut(n) {
            for (o, &b) in row.iter_mut().zip(&bv) {
                *o += b;
            }
        }
        Ok(self.push(Op::AddBias(a, bias), out))
    }

    /// Channel concatenation of two `[B,·,H,W]` tensors.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ba, ca, ha, wa) = self.dims4(a)?;
        let (bb, cb, hb, wb) = self.dims4(b)?;
        if (ba, ha, wa) != (bb, hb, wb) {
            return cfg(format!("concat_channels: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let hw = ha * wa;
        let (xa, xb) = (self.data(a), self.data(b));
        let mut out = Vec::with_capacity(ba * (ca + cb) * hw);
        for bi in 0..ba {
            out.extend_from_slice(&xa[bi * ca * hw..(bi + 1) * ca * hw]);
            out.extend_from_slice(&xb[bi * cb * hw..(bi + 1) * cb * hw]);
        }
        let t = Tensor::new(vec![ba, ca + cb, ha, wa], out)?;
        Ok(self.push(Op::Concat(a, b), t))
    }

    /// `[B,C,H,W] · [B,1,H,W]`, the gate repeated across channels.
    pub fn gate(&mut self, input: Var, gate: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(input)?;
        if self.shape(gate) != [b, 1, h, w] {
            return Err(Error::Contract(format!(
                "gate: expected gate shape [{b}, 1, {h}, {w}], got {:?}",
                self.shape(gate)
            )));
        }
        let hw = h * w;
        let g = self.data(gate);
        let mut out = self.value(input).clone();
        for bi in 0..b {
            for ci in 0..c {
                let o = (bi * c + ci) * hw;
                for j in 0..hw {
                    out.data_mut()[o + j] *= g[bi * hw + j];
                }
            }
        }
        Ok(self.push(Op::Gate { input, gate }, out))
    }

    /// Feature-wise affine modulation: `x·(1 + scale[b,c]) + shift[b,c]`.
    pub fn film(&mut self, input: Var, scale: Var, shift: Var) -> Result<Var> {
        let (b, c, h, w) = self.dims4(input)?;
        if self.shape(scale) != [b, c] || self.shape(shift) != [b, c] {
            return cfg(format!(
                "film: modulation shapes {:?}/{:?}, expected [{b}, {c}]",
                self.shape(scale),
                self.shape(shift)
            ));
        }
        let hw = h * w;
        let (sc, sh) = (self.data(scale).to_vec(), self.data(shift).to_vec());
        let mut out = self.value(input).clone();
        for (p, plane) in out.data_mut().chunks_mut(hw).enumerate() {
            let (m, a) = (S::one() + sc[p], sh[p]);
            plane.iter_mut().for_each(|v| *v = *v * m + a);
        }
        Ok(self.push(Op::Film { input, scale, shift }, out))
    }

    /// Mean squared error between two same-shaped nodes.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.mul(d, d)?;
        Ok(self.mean(sq))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Grads<S>> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let shapes: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![S::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::Conv2d { input, kernel, bias, geom } => {
                    let (gi, gk, gb) = kernels::conv2d_backward(geom, self.data(*input), self.data(*kernel), &g);
                    acc(&mut grads, *input, &gi);
                    acc(&mut grads, *kernel, &gk);
                    if let Some(b) = bias {
                        acc(&mut grads, *b, &gb);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, &g);
                    let neg: Vec<S> = g.iter().map(|&v| -v).collect();
                    acc(&mut grads, *b, &neg);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<S> = g.iter().zip(self.data(*b)).map(|(&d, &y)| d * y).collect();
                    let gb: Vec<S> = g.iter().zip(self.data(*a)).map(|(&d, &x)| d * x).collect();
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::Scale(a, k) => {
                    let ga: Vec<S> = g.iter().map(|&d| d * *k).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Sigmoid(a) => {
                    let ga: Vec<S> =
                        g.iter().zip(node.value.data()).map(|(&d, &s)| d * s * (S::one() - s)).collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Silu(a) => {
                    let ga: Vec<S> = g
                        .iter()
                        .zip(self.data(*a))
                        .map(|(&d, &x)| {
                            let s = sigmoid(x);
                            d * s * (S::one() + x * (S::one() - s))
                        })
                        .collect();
                    acc(&mut grads, *a, &ga);
                }
                Op::Sum(a) => {
                    let ga = vec![g[0]; self.value(*a).len()];
                    acc(&mut grads, *a, &ga);
                }
                Op::Mean(a) => {
                    let n = self.value(*a).len();
                    let ga = vec![g[0] / S::lit(n as f64); n];
                    acc(&mut grads, *a, &ga);
                }
                Op::MaxOverChannels { input, argmax } => {
                    let (b, c, h, w) = self.dims4(*input)?;
                    let hw = h * w;
                    let mut ga = vec![S::zero(); b * c * hw];
                    for bi in 0..b {
                        for j in 0..hw {
                            ga[(bi * c + argmax[bi * hw + j]) * hw + j] = g[bi * hw + j];
                        }
                    }
                    acc(&mut grads, *input, &ga);
                }
                Op::MeanOverChannels(a) => {
                    let (b, c, h, w) = self.dims4(*a)?;
                    let hw = h * w;
                    let inv = S::one() / S::lit(c as f64);
                    let mut ga = vec![S::zero(); b * c * hw];
                    for bi in 0..b {
                        for ci in 0..c {
                            for j in 0..hw {
                                ga[(bi * c + ci) * hw + j] = g[bi * hw + j] * inv;
                            }
                        }
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::Upsample2x(a) => {
                    let (b, c, h, w) = self.dims4(*a)?;
                    let ow = 2 * w;
                    let mut ga = vec![S::zero(); b * c * h * w];
                    for p in 0..b * c {
                        for y in 0..2 * h {
                            for x in 0..ow {
                                ga[p * h * w + (y / 2) * w + x / 2] += g[p * 4 * h * w + y * ow + x];
                            }
                        }
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::Downsample2x(a) => {
                    let (b, c, h, w) = self.dims4(*a)?;
                    let (oh, ow) = (h / 2, w / 2);
                    let q = S::lit(0.25);
                    let mut ga = vec![S::zero(); b * c * h * w];
                    for p in 0..b * c {
                        for y in 0..h {
                            for x in 0..w {
                                ga[p * h * w + y * w + x] = g[p * oh * ow + (y / 2) * ow + x / 2] * q;
                            }
                        }
                    }
                    acc(&mut grads, *a, &ga);
                }
                Op::GroupNorm { input, gamma, beta, groups, stats } => {
                    let dims = self.dims4(*input)?;
                    let (gx, gg, gb) =
                        kernels::group_norm_backward(self.data(*input), dims, *groups, self.data(*gamma), stats, &g);
                    acc(&mut grads, *input, &gx);
                    acc(&mut grads, *gamma, &gg);
                    acc(&mut grads, *beta, &gb);
                }
                Op::Matmul(a, b) => {
                    let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                    let n = self.shape(*b)[1];
                    let mut ga = vec![S::zero(); m * k];
                    let mut gb = vec![S::zero(); k * n];
                    // dA = G·Bᵀ, dB = Aᵀ·G
                    S::gemm(m, n, k, S::one(), &g, n as isize, 1, self.data(*b), 1, n as isize, S::zero(), &mut ga, k as isize, 1);
                    S::gemm(k, m, n, S::one(), self.data(*a), 1, k as isize, &g, n as isize, 1, S::zero(), &mut gb, n as isize, 1);
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::AddBias(a, bias) => {
                    let n = self.shape(*bias)[0];
                    let mut gb = vec![S::zero(); n];
                    for row in g.chunks(n) {
                        for (o, &v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *bias, &gb);
                }
                Op::Concat(a, b) => {
                    let (bn, ca, h, w) = self.dims4(*a)?;
                    let cb = self.shape(*b)[1];
                    let hw = h * w;
                    let mut ga = Vec::with_capacity(bn * ca * hw);
                    let mut gb = Vec::with_capacity(bn * cb * hw);
                    for bi in 0..bn {
                        let base = bi * (ca + cb) * hw;
                        ga.extend_from_slice(&g[base..base + ca * hw]);
                        gb.extend_from_slice(&g[base + ca * hw..base + (ca + cb) * hw]);
                    }
                    acc(&mut grads, *a, &ga);
                    acc(&mut grads, *b, &gb);
                }
                Op::Gate { input, gate } => {
                    let (b, c, h, w) = self.dims4(*input)?;
                    let hw = h * w;
                    let (x, gt) = (self.data(*input), self.data(*gate));
                    let mut gi = vec![S::zero(); x.len()];
                    let mut gg = vec![S::zero(); b * hw];
                    for bi in 0..b {
                        for ci in 0..c {
                            let o = (bi * c + ci) * hw;
                            for j in 0..hw {
                                gi[o + j] = g[o + j] * gt[bi * hw + j];
                                gg[bi * hw + j] += g[o + j] * x[o + j];
                            }
                        }
                    }
                    acc(&mut grads, *input, &gi);
                    acc(&mut grads, *gate, &gg);
                }
                Op::Film { input, scale, shift } => {
                    let hw = {
                        let (_, _, h, w) = self.dims4(*input)?;
                        h * w
                    };
                    let (x, sc) = (self.data(*input), self.data(*scale));
                    let planes = sc.len();
                    let mut gi = vec![S::zero(); x.len()];
                    let mut gs = vec![S::zero(); planes];
                    let mut gh = vec![S::zero(); planes];
                    for p in 0..planes {
                        let m = S::one() + sc[p];
                        for j in p * hw..(p + 1) * hw {
                            gi[j] = g[j] * m;
                            gs[p] += g[j] * x[j];
                            gh[p] += g[j];
                        }
                    }
                    acc(&mut grads, *input, &gi);
                    acc(&mut grads, *scale, &gs);
                    acc(&mut grads, *shift, &gh);
                }
            }
        }
        Ok(Grads { shapes, grads })
    }
}

fn acc<S: Scalar>(grads: &mut [Option<Vec<S>>], v: Var, g: &[S]) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(g).for_each(|(e, &d)| *e += d),
        slot @ None => *slot = Some(g.to_vec()),
    }
}

#[inline]
pub fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
