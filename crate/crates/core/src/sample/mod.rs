//! Explicit Euler integration of a learned field with classifier-free
//! guidance.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::model::{ModelState, Weights};
use crate::numeric::Tensor;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub steps: usize,
    /// Guidance scale `w`; 0 disables the unconditional pass.
    pub guidance: f64,
    pub use_ema: bool,
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { steps: 1, guidance: 1.5, use_ema: true, seed: 0 }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.guidance >= 0.0 && self.guidance.is_finite()) {
            return Err(Error::Config(format!("guidance must be finite and ≥ 0, got {}", self.guidance)));
        }
        Ok(())
    }

    pub fn weights(&self) -> Weights {
        if self.use_ema {
            Weights::Ema
        } else {
            Weights::Online
        }
    }
}

/// `(1 + w)·v_cond − w·v_uncond`.
pub fn guided_field<S: Scalar>(v_cond: &Tensor<S>, v_uncond: &Tensor<S>, w: S) -> Result<Tensor<S>> {
    v_cond
        .check_same_shape(v_uncond)
        .map_err(|e| Error::Contract(e.to_string()))?;
    let a = S::one() + w;
    v_cond.zip_map(v_uncond, |c, u| a * c - w * u)
}

/// Wraps a field with guidance against the all-zeros null condition.
#[derive(Clone, Copy, Debug)]
pub struct Guided<F> {
    pub field: F,
    pub w: f64,
}

impl<S: Scalar, F: VectorField<S>> VectorField<S> for Guided<F> {
    fn velocity(&self, x: &Tensor<S>, t: S, cond: &Tensor<S>) -> Result<Tensor<S>> {
        let v_cond = self.field.velocity(x, t, cond)?;
        if self.w == 0.0 {
            return Ok(v_cond);
        }
        let null = Tensor::zeros(cond.shape().to_vec());
        let v_uncond = self.field.velocity(x, t, &null)?;
        guided_field(&v_cond, &v_uncond, S::lit(self.w))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutput<S> {
    /// State after the last step, unclamped.
    pub raw: Tensor<S>,
    /// `raw` clamped to `[0, 1]`, for metrics.
    pub clamped: Tensor<S>,
}

/// `x ← x + Δt·v(t, x, c)` at `t = 0, Δt, …, 1 − Δt`, `Δt = 1/steps`.
pub fn euler_integrate<S: Scalar, F: VectorField<S>>(
    field: &F,
    x0: &Tensor<S>,
    cond: &Tensor<S>,
    steps: usize,
) -> Result<SampleOutput<S>> {
    if steps == 0 {
        return Err(Error::Config("steps must be at least 1".into()));
    }
    let dt = S::one() / S::lit(steps as f64);
    let mut x = x0.clone();
    for k in 0..steps {
        let t = S::lit(k as f64) * dt;
        let v = field.velocity(&x, t, cond)?;
        x = x.zip_map(&v, |xi, vi| xi + dt * vi)?;
        if !x.is_finite() {
            return Err(Error::Sampling { step: k, reason: "non-finite state".into() });
        }
    }
    let clamped = x.map(|v| v.max(S::zero()).min(S::one()));
    Ok(SampleOutput { raw: x, clamped })
}

/// 64-bit FNV-1a over the little-endian bytes of the condition values.
fn condition_hash<S: Scalar>(cond: &Tensor<S>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in cond.data() {
        for b in v.as_f64().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// Initial noise for one scene: depends on the seed and the condition
/// contents only, so reordering scenes reorders outputs.
pub fn initial_noise<S: Scalar>(cond: &Tensor<S>, seed: u64) -> Result<Tensor<S>> {
    let (b, _, h, w) = cond.dims4()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ condition_hash(cond).rotate_left(17));
    Ok(Tensor::randn(vec![b, 1, h, w], &mut rng))
}

/// Samples one map for the condition `[1, C, H, W]`.
pub fn sample_model<S: Scalar>(state: &ModelState<S>, cond: &Tensor<S>, config: &SampleConfig) -> Result<SampleOutput<S>> {
    config.validate()?;
    let x0 = initial_noise(cond, config.seed)?;
    let field = Guided { field: state.field(config.weights()), w: config.guidance };
    euler_integrate(&field, &x0, cond, config.steps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_s: f64,
    /// Population standard deviation; 0 for a single measurement.
    pub std_s: f64,
}

impl LatencyStats {
    pub fn from_samples(seconds: &[f64]) -> Self {
        let n = seconds.len();
        if n == 0 {
            return Self { count: 0, mean_s: 0.0, std_s: 0.0 };
        }
        let mean = seconds.iter().sum::<f64>() / n as f64;
        let var = seconds.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        Self { count: n, mean_s: mean, std_s: var.sqrt() }
    }
}

#[derive(Clone, Debug)]
pub struct BatchSamples<S> {
    pub outputs: Vec<SampleOutput<S>>,
    pub latency: LatencyStats,
}

/// Samples each condition separately and times each one.
pub fn batch_sample<S: Scalar>(
    state: &ModelState<S>,
    conditions: &[Tensor<S>],
    config: &SampleConfig,
) -> Result<BatchSamples<S>> {
    if conditions.is_empty() {
        return Err(Error::Contract("batch_sample needs at least one scene".into()));
    }
    config.validate()?;
    let mut outputs = Vec::with_capacity(conditions.len());
    let mut times = Vec::with_capacity(conditions.len());
    for c in conditions {
        let start = Instant::now();
        outputs.push(sample_model(state, c, config)?);
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(BatchSamples { outputs, latency: LatencyStats::from_samples(&times) })
}
