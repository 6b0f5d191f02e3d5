//! The interface samplers and diagnostics use to query a velocity field.

use crate::error::Result;
use crate::numeric::Tensor;
use crate::scalar::Scalar;

/// A time-dependent conditional velocity field `v(t, x, c)`.
///
/// `x` is `[B, 1, H, W]`, `cond` is `[B, C, H, W]`; the result has the shape of `x`.
pub trait VectorField<S: Scalar> {
    fn velocity(&self, x: &Tensor<S>, t: S, cond: &Tensor<S>) -> Result<Tensor<S>>;
}

impl<S: Scalar, F: VectorField<S> + ?Sized> VectorField<S> for &F {
    fn velocity(&self, x: &Tensor<S>, t: S, cond: &Tensor<S>) -> Result<Tensor<S>> {
        (**self).velocity(x, t, cond)
    }
}

/// The exact straight-path field `x1 − x0` for a known endpoint pair,
/// independent of `t`, `x` and the condition.
#[derive(Clone, Debug)]
pub struct PairField<S> {
    target: Tensor<S>,
}

impl<S: Scalar> PairField<S> {
    pub fn new(x0: &Tensor<S>, x1: &Tensor<S>) -> Result<Self> {
        Ok(Self { target: x1.sub(x0)? })
    }
}

impl<S: Scalar> VectorField<S> for PairField<S> {
    fn velocity(&self, x: &Tensor<S>, _t: S, _cond: &Tensor<S>) -> Result<Tensor<S>> {
        x.check_same_shape(&self.target)?;
        Ok(self.target.clone())
    }
}

/// `v ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroField;

impl<S: Scalar> VectorField<S> for ZeroField {
    fn velocity(&self, x: &Tensor<S>, _t: S, _cond: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(Tensor::zeros(x.shape().to_vec()))
    }
}
