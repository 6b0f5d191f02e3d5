//! Raw forward/backward kernels over flat buffers. Shape validation happens in
//! the graph layer; these functions assume consistent sizes.

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.h + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.w + 2 * self.pad - self.k) / self.stride + 1
    }

    fn patch(&self) -> usize {
        self.cin * self.k * self.k
    }

    fn positions(&self) -> usize {
        self.out_h() * self.out_w()
    }
}

/// Unfold one batch element into a `[cin·k·k, out_h·out_w]` column matrix.
fn im2col<S: Scalar>(g: &ConvGeom, input: &[S], cols: &mut [S]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    for ci in 0..g.cin {
        let plane = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(S::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, d) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *d = if ix < 0 || ix >= g.w as isize { S::zero() } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back onto an input plane.
fn col2im<S: Scalar>(g: &ConvGeom, cols: &[S], grad_in: &mut [S]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let p = oh * ow;
    for ci in 0..g.cin {
        let plane = &mut grad_in[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_forward<S: Scalar>(g: &ConvGeom, input: &[S], kernel: &[S], bias: Option<&[S]>) -> Vec<S> {
    let (kk, p) = (g.patch(), g.positions());
    let mut out = vec![S::zero(); g.batch * g.cout * p];
    let mut cols = vec![S::zero(); kk * p];
    let in_stride = g.cin * g.h * g.w;
    for b in 0..g.batch {
        im2col(g, &input[b * in_stride..(b + 1) * in_stride], &mut cols);
        let dst = &mut out[b * g.cout * p..(b + 1) * g.cout * p];
        if let Some(bias) = bias {
            for (co, row) in dst.chunks_mut(p).enumerate() {
                row.fill(bias[co]);
            }
        }
        let beta = if bias.is_some() { S::one() } else { S::zero() };
        S::gemm(g.cout, kk, p, S::one(), kernel, kk as isize, 1, &cols, p as isize, 1, beta, dst, p as isize, 1);
    }
    out
}

/// Returns `(grad_input, grad_kernel, grad_bias)`.
pub fn conv2d_backward<S: Scalar>(
    g: &ConvGeom,
    input: &[S],
    kernel: &[S],
    grad_out: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let (kk, p) = (g.patch(), g.positions());
    let in_stride = g.cin * g.h * g.w;
    let mut grad_in = vec![S::zero(); input.len()];
    let mut grad_k = vec![S::zero(); kernel.len()];
    let mut grad_b = vec![S::zero(); g.cout];
    let mut cols = vec![S::zero(); kk * p];
    let mut dcols = vec![S::zero(); kk * p];
    for b in 0..g.batch {
        let go = &grad_out[b * g.cout * p..(b + 1) * g.cout * p];
        for (co, row) in go.chunks(p).enumerate() {
            grad_b[co] += row.iter().copied().sum::<S>();
        }
        im2col(g, &input[b * in_stride..(b + 1) * in_stride], &mut cols);
        // dK += dOut · colsᵀ
        S::gemm(g.cout, p, kk, S::one(), go, p as isize, 1, &cols, 1, p as isize, S::one(), &mut grad_k, kk as isize, 1);
        // dCols = Kᵀ · dOut
        S::gemm(kk, g.cout, p, S::one(), kernel, 1, kk as isize, go, p as isize, 1, S::zero(), &mut dcols, p as isize, 1);
        col2im(g, &dcols, &mut grad_in[b * in_stride..(b + 1) * in_stride]);
    }
    (grad_in, grad_k, grad_b)
}

/// Per-(batch, group) statistics saved by the forward pass.
#[derive(Clone, Debug)]
pub struct GroupStats<S> {
    pub mean: Vec<S>,
    pub rstd: Vec<S>,
}

pub fn group_norm_forward<S: Scalar>(
    x: &[S],
    dims: (usize, usize, usize, usize),
    groups: usize,
    gamma: &[S],
    beta: &[S],
    eps: S,
) -> (Vec<S>, GroupStats<S>) {
    let (b, c, h, w) = dims;
    let hw = h * w;
    let cpg = c / groups;
    let n = S::lit((cpg * hw) as f64);
    let mut out = vec![S::zero(); x.len()];
    let mut stats = GroupStats { mean: Vec::with_capacity(b * groups), rstd: Vec::with_capacity(b * groups) };
    for bi in 0..b {
        for gi in 0..groups {
            let start = (bi * c + gi * cpg) * hw;
            let seg = &x[start..start + cpg * hw];
            let mean = seg.iter().copied().sum::<S>() / n;
            let var = seg.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
            let rstd = S::one() / (var + eps).sqrt();
            for ci in 0..cpg {
                let ch = gi * cpg + ci;
                let (ga, be) = (gamma[ch], beta[ch]);
                let o = start + ci * hw;
                for j in 0..hw {
                    out[o + j] = (x[o + j] - mean) * rstd * ga + be;
                }
            }
            stats.mean.push(mean);
            stats.rstd.push(rstd);
        }
    }
    (out, stats)
}

/// Returns `(grad_x, grad_gamma, grad_beta)`.
pub fn group_norm_backward<S: Scalar>(
    x: &[S],
    dims: (usize, usize, usize, usize),
    groups: usize,
    gamma: &[S],
    stats: &GroupStats<S>,
    grad_out: &[S],
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let (b, c, h, w) = dims;
    let hw = h * w;
    let cpg = c / groups;
    let n = S::lit((cpg * hw) as f64);
    let mut gx = vec![S::zero(); x.len()];
    let mut gg = vec![S::zero(); c];
    let mut gb = vec![S::zero(); c];
    for bi in 0..b {
        for gi in 0..groups {
            let idx = bi * groups + gi;
            let (mean, rstd) = (stats.mean[idx], stats.rstd[idx]);
            let start = (bi * c + gi * cpg) * hw;
            let mut sum_d = S::zero();
            let mut sum_dx = S::zero();
            for ci in 0..cpg {
                let ch = gi * cpg + ci;
                let o = start + ci * hw;
                for j in 0..hw {
                    let xhat = (x[o + j] - mean) * rstd;
                    let dy = grad_out[o + j];
                    gg[ch] += dy * xhat;
                    gb[ch] += dy;
                    let dxhat = dy * gamma[ch];
                    sum_d += dxhat;
                    sum_dx += dxhat * xhat;
                }
            }
            for ci in 0..cpg {
                let ch = gi * cpg + ci;
                let o = start + ci * hw;
                for j in 0..hw {
                    let xhat = (x[o + j] - mean) * rstd;
                    let dxhat = grad_out[o + j] * gamma[ch];
                    gx[o + j] = rstd * (dxhat - sum_d / n - xhat * sum_dx / n);
                }
            }
        }
    }
    (gx, gg, gb)
}
