use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sinusoidal features `[sin(t·ω_0..), cos(t·ω_0..)]` with `ω_k` spaced
/// geometrically from 1 to 10000.
pub fn time_embedding<S: Scalar>(t: S, dim: usize) -> Result<Vec<S>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Config(format!("time embedding dimension must be even and positive, got {dim}")));
    }
    let half = dim / 2;
    let freqs: Vec<S> = (0..half)
        .map(|k| {
            let frac = if half > 1 { k as f64 / (half - 1) as f64 } else { 0.0 };
            S::lit(10000f64.powf(frac))
        })
        .collect();
    let mut out = Vec::with_capacity(dim);
    out.extend(freqs.iter().map(|&w| (t * w).sin()));
    out.extend(freqs.iter().map(|&w| (t * w).cos()));
    Ok(out)
}
