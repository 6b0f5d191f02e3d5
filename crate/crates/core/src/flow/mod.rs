//! Straight-line conditional probability paths and the quantities derived
//! from them: interpolants, target fields, conditional scores and the
//! flow-matching regression loss.

pub mod continuity;
pub mod marginal;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use continuity::{continuity_residual_1d, continuity_residual_2d, GaussianPath1d};
pub use marginal::{marginal_field_mc, FixedPair, IndependentCoupling, MarginalEstimate, PairSampler};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::numeric::{Graph, Tensor, Var};
use crate::scalar::Scalar;

/// Noise level `σ_t` along the path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PathSchedule {
    /// `σ_t = σ` for all `t`. `σ = 0` gives deterministic straight lines.
    Constant { sigma: f64 },
}

impl Default for PathSchedule {
    fn default() -> Self {
        PathSchedule::Constant { sigma: 0.0 }
    }
}

impl PathSchedule {
    pub fn constant(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("path noise must be finite and ≥ 0, got {sigma}")));
        }
        Ok(PathSchedule::Constant { sigma })
    }

    pub fn sigma(&self, _t: f64) -> f64 {
        match *self {
            PathSchedule::Constant { sigma } => sigma,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma(0.0) == 0.0
    }
}

fn check_t<S: Scalar>(t: S) -> Result<()> {
    if !(t >= S::zero() && t <= S::one()) {
        return Err(Error::Contract(format!("t = {t} outside [0, 1]")));
    }
    Ok(())
}

fn contract_shapes<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<()> {
    a.check_same_shape(b).map_err(|e| Error::Contract(e.to_string()))
}

/// `x_t = (1−t)·x0 + t·x1 + σ_t·ε`. `eps` may be omitted when `σ_t = 0`.
pub fn interpolate<S: Scalar>(
    x0: &Tensor<S>,
    x1: &Tensor<S>,
    t: S,
    schedule: &PathSchedule,
    eps: Option<&Tensor<S>>,
) -> Result<Tensor<S>> {
    check_t(t)?;
    contract_shapes(x0, x1)?;
    let sigma = S::lit(schedule.sigma(t.as_f64()));
    let one_minus = S::one() - t;
    let mut out = x0.zip_map(x1, |a, b| one_minus * a + t * b)?;
    if sigma != S::zero() {
        let eps = eps.ok_or_else(|| Error::Contract("σ_t > 0 requires a noise draw".into()))?;
        contract_shapes(x0, eps)?;
        for (o, &e) in out.data_mut().iter_mut().zip(eps.data()) {
            *o += sigma * e;
        }
    }
    Ok(out)
}

/// Conditional target field of the straight path, `x1 − x0`, constant in `t`.
pub fn target_field<S: Scalar>(x0: &Tensor<S>, x1: &Tensor<S>) -> Result<Tensor<S>> {
    contract_shapes(x0, x1)?;
    x1.sub(x0)
}

/// `∇ log p_t(x | x0, x1) = −(x − (1−t)x0 − t·x1) / σ_t²`.
pub fn conditional_score<S: Scalar>(x: &Tensor<S>, x0: &Tensor<S>, x1: &Tensor<S>, t: S, sigma_t: S) -> Result<Tensor<S>> {
    if !(sigma_t > S::zero()) {
        return Err(Error::Domain(
            "conditional score is undefined in the deterministic limit σ_t = 0".into(),
        ));
    }
    check_t(t)?;
    contract_shapes(x, x0)?;
    contract_shapes(x0, x1)?;
    let inv_var = S::one() / (sigma_t * sigma_t);
    let mean = interpolate(x0, x1, t, &PathSchedule::default(), None)?;
    x.zip_map(&mean, |xi, mi| -(xi - mi) * inv_var)
}

/// One training tuple on the path.
#[derive(Clone, Debug)]
pub struct FlowSample<S> {
    pub x0: Tensor<S>,
    pub x1: Tensor<S>,
    pub t: S,
    pub sigma_t: S,
    pub eps: Tensor<S>,
    pub x_t: Tensor<S>,
    pub u_t: Tensor<S>,
    pub condition: Tensor<S>,
}

impl<S: Scalar> FlowSample<S> {
    /// Draw `x0`, `ε` from `noise_rng` and assemble the tuple for time `t`.
    pub fn draw<R: Rng + ?Sized>(
        x1: Tensor<S>,
        condition: Tensor<S>,
        t: S,
        schedule: &PathSchedule,
        noise_rng: &mut R,
    ) -> Result<Self> {
        let x0 = Tensor::randn(x1.shape().to_vec(), noise_rng);
        let sigma = schedule.sigma(t.as_f64());
        let eps = if sigma > 0.0 {
            Tensor::randn(x1.shape().to_vec(), noise_rng)
        } else {
            Tensor::zeros(x1.shape().to_vec())
        };
        Self::from_parts(x0, x1, t, schedule, eps, condition)
    }

    pub fn from_parts(
        x0: Tensor<S>,
        x1: Tensor<S>,
        t: S,
        schedule: &PathSchedule,
        eps: Tensor<S>,
        condition: Tensor<S>,
    ) -> Result<Self> {
        let x_t = interpolate(&x0, &x1, t, schedule, Some(&eps))?;
        let u_t = target_field(&x0, &x1)?;
        Ok(Self { sigma_t: S::lit(schedule.sigma(t.as_f64())), x0, x1, t, eps, x_t, u_t, condition })
    }
}

/// Mean over batch and elements of `(v − u)²`, recorded on `g` so the caller
/// can differentiate it. `v` and `u` must be graph nodes of equal shape.
pub fn cfm_loss_graph<S: Scalar>(g: &mut Graph<S>, v: Var, u: Var) -> Result<Var> {
    g.mse(v, u)
}

/// Flow-matching loss of an arbitrary field on a batch of tuples, each
/// evaluated with its own (possibly dropped) condition.
pub fn cfm_loss<S: Scalar, F: VectorField<S>>(field: &F, batch: &[FlowSample<S>]) -> Result<S> {
    if batch.is_empty() {
        return Err(Error::Contract("cfm_loss requires a nonempty batch".into()));
    }
    let mut total = S::zero();
    let mut count = 0usize;
    for s in batch {
        let v = field.velocity(&s.x_t, s.t, &s.condition)?;
        let d = v.sub(&s.u_t)?;
        total += d.sq_norm();
        count += d.len();
    }
    Ok(total / S::lit(count as f64))
}

/// Monte-Carlo estimate of `∫₀¹ E‖v(x_t, t)‖² dt`, the transport kinetic energy.
///
/// Each of `n_time_samples` draws picks `t ~ U[0,1]` and one endpoint triple
/// from `pairs` (cycled in order) and evaluates the squared norm of the field.
pub fn kinetic_energy<S: Scalar, F: VectorField<S>, R: Rng + ?Sized>(
    field: &F,
    pairs: &[(Tensor<S>, Tensor<S>, Tensor<S>)],
    n_time_samples: usize,
    rng: &mut R,
) -> Result<S> {
    if pairs.is_empty() || n_time_samples == 0 {
        return Err(Error::Contract("kinetic_energy needs pairs and at least one time sample".into()));
    }
    let mut acc = S::zero();
    for i in 0..n_time_samples {
        let (x0, x1, c) = &pairs[i % pairs.len()];
        let t = S::lit(rng.random::<f64>());
        let x_t = interpolate(x0, x1, t, &PathSchedule::default(), None)?;
        let v = field.velocity(&x_t, t, c)?;
        acc += v.sq_norm() / S::lit(x0.shape()[0] as f64);
    }
    Ok(acc / S::lit(n_time_samples as f64))
}
