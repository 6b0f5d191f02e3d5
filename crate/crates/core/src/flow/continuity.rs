//! Finite-difference residual of the continuity equation
//! `∂p/∂t + ∇·(v p) = 0` for closed-form densities.
//!
//! Central differences in time and space: the residual of an exact
//! density/field pair vanishes at second order in `(h, dt)`.

use crate::error::{Error, Result};

/// Gaussian whose mean and standard deviation move linearly in `t`:
/// `x_t = m(t) + s(t)·z`, `z ~ N(0,1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPath1d {
    pub mean0: f64,
    pub mean1: f64,
    pub std0: f64,
    pub std1: f64,
}

impl GaussianPath1d {
    /// Unit-variance Gaussian translating from `from` to `to` over `t ∈ [0,1]`.
    pub fn translating(from: f64, to: f64) -> Self {
        Self { mean0: from, mean1: to, std0: 1.0, std1: 1.0 }
    }

    pub fn mean(&self, t: f64) -> f64 {
        (1.0 - t) * self.mean0 + t * self.mean1
    }

    pub fn std(&self, t: f64) -> f64 {
        (1.0 - t) * self.std0 + t * self.std1
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let s = self.std(t);
        let z = (x - self.mean(t)) / s;
        (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// The field that transports this density exactly.
    pub fn field(&self, x: f64, t: f64) -> f64 {
        (self.mean1 - self.mean0) + (self.std1 - self.std0) / self.std(t) * (x - self.mean(t))
    }
}

fn spacing(grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(Error::Contract("grid needs at least two points".into()));
    }
    let h = grid[1] - grid[0];
    if !(h > 0.0) {
        return Err(Error::Contract("grid must be strictly increasing".into()));
    }
    let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0));
    if !uniform {
        return Err(Error::Contract("grid must be uniformly spaced".into()));
    }
    Ok(h)
}

/// Residual on a uniform 1-D grid at time `t`.
pub fn continuity_residual_1d(
    field: impl Fn(f64, f64) -> f64,
    density: impl Fn(f64, f64) -> f64,
    grid: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let h = spacing(grid)?;
    if !(dt > 0.0) {
        return Err(Error::Contract("dt must be positive".into()));
    }
    let flux = |x: f64| field(x, t) * density(x, t);
    Ok(grid
        .iter()
        .map(|&x| {
            let dp_dt = (density(x, t + dt) - density(x, t - dt)) / (2.0 * dt);
            let div = (flux(x + h) - flux(x - h)) / (2.0 * h);
            dp_dt + div
        })
        .collect())
}

/// Residual on the tensor-product grid `xs × ys` (row-major, `ys` outer).
/// `field` returns the two velocity components.
pub fn continuity_residual_2d(
    field: impl Fn(f64, f64, f64) -> (f64, f64),
    density: impl Fn(f64, f64, f64) -> f64,
    xs: &[f64],
    ys: &[f64],
    t: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let hx = spacing(xs)?;
    let hy = spacing(ys)?;
    if !(dt > 0.0) {
        return Err(Error::Contract("dt must be positive".into()));
    }
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &y in ys {
        for &x in xs {
            let dp_dt = (density(x, y, t + dt) - density(x, y, t - dt)) / (2.0 * dt);
            let fx = |xx: f64| field(xx, y, t).0 * density(xx, y, t);
            let fy = |yy: f64| field(x, yy, t).1 * density(x, yy, t);
            let div = (fx(x + hx) - fx(x - hx)) / (2.0 * hx) + (fy(y + hy) - fy(y - hy)) / (2.0 * hy);
            out.push(dp_dt + div);
        }
    }
    Ok(out)
}

/// `max |r|` over a residual grid.
pub fn max_abs(residual: &[f64]) -> f64 {
    residual.iter().fold(0.0, |m, r| m.max(r.abs()))
}
