//! Conditional flow matching for radio map generation.
//!
//! The numeric core, network and training loop are generic over the
//! floating-point type ([`Scalar`], implemented for `f32` and `f64`).
//! Datasets, metrics and checkpoints on disk are always 64-bit.

pub mod ablation;
pub mod error;
pub mod field;
pub mod flow;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod render;
pub mod sample;
pub mod scalar;
pub mod scene;
pub mod train;

pub use error::{Error, Result};
pub use field::VectorField;
pub use numeric::{Grads, Graph, Tensor, Var};
pub use scalar::Scalar;

/// Double-precision tensor, the default for training and evaluation.
pub type Tensor64 = Tensor<f64>;
/// Single-precision tensor.
pub type Tensor32 = Tensor<f32>;
pub type ModelState64 = model::ModelState<f64>;
pub type ModelState32 = model::ModelState<f32>;
