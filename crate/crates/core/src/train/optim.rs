use crate::error::{Error, Result};
use crate::model::ParamSet;
use crate::numeric::Tensor;
use crate::scalar::Scalar;

/// Adaptive moments with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW<S> {
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
    t: i32,
}

impl<S: Scalar> AdamW<S> {
    /// Zero moments shaped like `params`; β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &ParamSet<S>) -> Self {
        let zeros: Vec<Tensor<S>> = params.tensors().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        Self { beta1: S::lit(0.9), beta2: S::lit(0.999), eps: S::lit(1e-8), m: zeros.clone(), v: zeros, t: 0 }
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    /// `θ ← θ − η·m̂/(√v̂ + ε) − η·λ·θ`. Rejects non-finite gradients
    /// before touching any state.
    pub fn step(&mut self, params: &mut ParamSet<S>, grads: &[Tensor<S>], lr: S, weight_decay: S) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::Contract(format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        for ((name, p), g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Contract(format!("gradient for '{name}' has shape {:?}", g.shape())));
            }
            if !g.is_finite() {
                return Err(Error::Contract(format!("non-finite gradient for '{name}'")));
            }
        }
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        for (i, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (k, theta) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + (S::one() - b1) * g[k];
                v[k] = b2 * v[k] + (S::one() - b2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *theta = *theta - lr * m_hat / (v_hat.sqrt() + self.eps) - lr * weight_decay * *theta;
            }
        }
        Ok(())
    }
}

/// Rescales all gradients together so their joint norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<S: Scalar>(grads: &mut [Tensor<S>], max_norm: S) -> S {
    let norm = grads.iter().map(Tensor::sq_norm).fold(S::zero(), |a, b| a + b).sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

/// `ema ← γ·ema + (1 − γ)·θ`, elementwise.
pub fn ema_update<S: Scalar>(ema: &mut ParamSet<S>, theta: &ParamSet<S>, gamma: S) -> Result<()> {
    ema.check_compatible(theta)?;
    let one_minus = S::one() - gamma;
    for (e, t) in ema.tensors_mut().iter_mut().zip(theta.tensors()) {
        for (a, &b) in e.data_mut().iter_mut().zip(t.data()) {
            *a = gamma * *a + one_minus * b;
        }
    }
    Ok(())
}
