//! Monte-Carlo estimate of the marginal field
//! `u_t(x) = E[p_t(x|x0,x1)·(x1 − x0)] / E[p_t(x|x0,x1)]`.
//!
//! Intended for low-dimensional checks only.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::flow::PathSchedule;

/// Source of `(x0, x1)` endpoint pairs.
pub trait PairSampler {
    fn dim(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>);
}

/// `x0 ~ N(0, I)` independent of `x1`, drawn uniformly from `targets`.
#[derive(Clone, Debug)]
pub struct IndependentCoupling {
    targets: Vec<Vec<f64>>,
}

impl IndependentCoupling {
    pub fn new(targets: Vec<Vec<f64>>) -> Result<Self> {
        let d = targets.first().map(Vec::len).ok_or_else(|| Error::Contract("no targets".into()))?;
        if targets.iter().any(|t| t.len() != d) {
            return Err(Error::Contract("targets have differing dimensions".into()));
        }
        Ok(Self { targets })
    }
}

impl PairSampler for IndependentCoupling {
    fn dim(&self) -> usize {
        self.targets[0].len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let x1 = self.targets[rng.random_range(0..self.targets.len())].clone();
        let x0 = (0..x1.len()).map(|_| rng.sample(StandardNormal)).collect();
        (x0, x1)
    }
}

/// A single deterministic pair.
#[derive(Clone, Debug)]
pub struct FixedPair {
    pub x0: Vec<f64>,
    pub x1: Vec<f64>,
}

impl PairSampler for FixedPair {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        (self.x0.clone(), self.x1.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalEstimate {
    pub mean: Vec<f64>,
    /// Delta-method standard error of the self-normalized estimator, per component.
    pub std_error: Vec<f64>,
    /// Kish effective sample size of the weights.
    pub effective_samples: f64,
}

/// Self-normalized importance estimate of the marginal field at `x`.
///
/// Weights are Gaussian path densities `N(x; (1−t)x0 + t·x1, σ_t² I)`,
/// computed in log space and shifted by their maximum before exponentiation.
pub fn marginal_field_mc<P: PairSampler, R: Rng + ?Sized>(
    pairs: &P,
    x: &[f64],
    t: f64,
    schedule: &PathSchedule,
    n_samples: usize,
    rng: &mut R,
) -> Result<MarginalEstimate> {
    let sigma = schedule.sigma(t);
    if !(sigma > 0.0) {
        return Err(Error::Contract("marginal field weights need σ_t > 0".into()));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Contract(format!("t = {t} outside [0, 1]")));
    }
    if x.len() != pairs.dim() {
        return Err(Error::Contract(format!("point has dimension {}, pairs have {}", x.len(), pairs.dim())));
    }
    if n_samples == 0 {
        return Err(Error::Contract("n_samples must be positive".into()));
    }
    let d = x.len();
    let inv_two_var = 1.0 / (2.0 * sigma * sigma);
    let mut log_w = Vec::with_capacity(n_samples);
    let mut fields = Vec::with_capacity(n_samples * d);
    for _ in 0..n_samples {
        let (x0, x1) = pairs.sample(rng);
        let mut sq = 0.0;
        for k in 0..d {
            let mu = (1.0 - t) * x0[k] + t * x1[k];
            sq += (x[k] - mu) * (x[k] - mu);
            fields.push(x1[k] - x0[k]);
        }
        log_w.push(-sq * inv_two_var);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Estimation("every density weight underflowed".into()));
    }
    let w: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    if !(sum_w > 0.0 && sum_w.is_finite()) {
        return Err(Error::Estimation("density weights sum to zero".into()));
    }
    let mut mean = vec![0.0; d];
    for (i, &wi) in w.iter().enumerate() {
        for k in 0..d {
            mean[k] += wi * fields[i * d + k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= sum_w);
    let mut var = vec![0.0; d];
    for (i, &wi) in w.iter().enumerate() {
        for k in 0..d {
            let r = fields[i * d + k] - mean[k];
            var[k] += wi * wi * r * r;
        }
    }
    let std_error = var.iter().map(|v| v.sqrt() / sum_w).collect();
    Ok(MarginalEstimate { mean, std_error, effective_samples: sum_w * sum_w / sum_w2 })
}
