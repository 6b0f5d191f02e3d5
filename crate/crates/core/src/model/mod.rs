//! Conditional vector-field network and its parameter state.

pub mod attention;
pub mod checkpoint;
pub mod config;
pub mod embed;
pub mod net;
pub mod params;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use attention::{attention_gate, spatial_attention};
pub use config::{ModelConfig, Variant};
pub use embed::time_embedding;
pub use net::VelocityNet;
pub use params::ParamSet;

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::numeric::{Graph, Tensor};
use crate::scalar::Scalar;

/// Which copy of the parameters to evaluate with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weights {
    Online,
    /// Falls back to the online weights when no shadow is tracked.
    Ema,
}

/// Network parameters plus the optional EMA shadow.
#[derive(Clone, Debug)]
pub struct ModelState<S> {
    pub config: ModelConfig,
    pub params: ParamSet<S>,
    pub ema: Option<ParamSet<S>>,
    net: VelocityNet,
}

impl<S: Scalar> ModelState<S> {
    /// Freshly initialized parameters; the EMA shadow starts as a copy.
    pub fn init(config: &ModelConfig, seed: u64, track_ema: bool) -> Result<Self> {
        let net = VelocityNet::new(config)?;
        let params: ParamSet<S> = net.init_params(&mut ChaCha8Rng::seed_from_u64(seed));
        let ema = track_ema.then(|| params.clone());
        Ok(Self { config: config.clone(), params, ema, net })
    }

    pub fn from_parts(config: ModelConfig, params: ParamSet<S>, ema: Option<ParamSet<S>>) -> Result<Self> {
        let net = VelocityNet::new(&config)?;
        net.check_params(&params)?;
        if let Some(e) = &ema {
            params.check_compatible(e)?;
        }
        Ok(Self { config, params, ema, net })
    }

    pub fn net(&self) -> &VelocityNet {
        &self.net
    }

    pub fn count_parameters(&self) -> usize {
        self.params.count()
    }

    pub fn weights(&self, which: Weights) -> &ParamSet<S> {
        match which {
            Weights::Ema => self.ema.as_ref().unwrap_or(&self.params),
            Weights::Online => &self.params,
        }
    }

    /// Evaluate `v(t, x_t, c)` for a batch without keeping the graph.
    pub fn forward(&self, x_t: &Tensor<S>, t: &[S], cond: &Tensor<S>, which: Weights) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let p = self.net.bind(&mut g, self.weights(which));
        let xv = g.leaf(x_t.clone());
        let cv = g.leaf(cond.clone());
        let out = self.net.forward(&mut g, &p, xv, t, cv)?;
        Ok(g.value(out).clone())
    }

    /// Condition-stem features for `cond` of shape `[B, cond_channels, H, W]`.
    pub fn condition_embed(&self, cond: &Tensor<S>, which: Weights) -> Result<Tensor<S>> {
        let mut g = Graph::new();
        let p = self.net.bind(&mut g, self.weights(which));
        let cv = g.leaf(cond.clone());
        let out = self.net.condition_embed(&mut g, &p, cv)?;
        Ok(g.value(out).clone())
    }

    /// The model as a [`VectorField`] using the given weights.
    pub fn field(&self, which: Weights) -> ModelField<'_, S> {
        ModelField { state: self, which }
    }
}

/// Borrowed view of a model evaluating one parameter copy.
#[derive(Clone, Copy, Debug)]
pub struct ModelField<'a, S> {
    state: &'a ModelState<S>,
    which: Weights,
}

impl<S: Scalar> VectorField<S> for ModelField<'_, S> {
    fn velocity(&self, x: &Tensor<S>, t: S, cond: &Tensor<S>) -> Result<Tensor<S>> {
        let b = *x.shape().first().ok_or_else(|| Error::Config("empty input".into()))?;
        self.state.forward(x, &vec![t; b], cond, self.which)
    }
}

#[cfg(test)]
mod tests;
