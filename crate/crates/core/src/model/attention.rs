//! Spatial attention refinement head.
//!
//! The gate is `sigmoid(conv7×7([mean_c; max_c](features ‖ cond)))`, one value
//! per pixel in `(0, 1)`, multiplied into every channel of `features`.

use crate::error::{Error, Result};
use crate::numeric::{Graph, Var};
use crate::scalar::Scalar;

pub const ATTENTION_KERNEL: usize = 7;

/// Per-pixel gate `[B,1,H,W]` computed from decoder features and condition features.
pub fn attention_gate<S: Scalar>(
    g: &mut Graph<S>,
    features: Var,
    cond_features: Var,
    kernel: Var,
    bias: Var,
) -> Result<Var> {
    let (fb, _, fh, fw) = g.value(features).dims4()?;
    let (cb, _, ch, cw) = g.value(cond_features).dims4()?;
    if (fb, fh, fw) != (cb, ch, cw) {
        return Err(Error::Contract(format!(
            "spatial attention: features {:?} and condition features {:?} disagree spatially",
            g.shape(features),
            g.shape(cond_features)
        )));
    }
    let joint = g.concat_channels(features, cond_features)?;
    let avg = g.mean_over_channels(joint)?;
    let max = g.max_over_channels(joint)?;
    let pooled = g.concat_channels(avg, max)?;
    let logits = g.conv2d(pooled, kernel, Some(bias), 1, ATTENTION_KERNEL / 2)?;
    Ok(g.sigmoid(logits))
}

/// `features · gate`, gate broadcast over channels.
pub fn spatial_attention<S: Scalar>(
    g: &mut Graph<S>,
    features: Var,
    cond_features: Var,
    kernel: Var,
    bias: Var,
) -> Result<Var> {
    let gate = attention_gate(g, features, cond_features, kernel, bias)?;
    g.gate(features, gate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Tensor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_everything_gives_half_gate_and_zero_output() {
        let mut g = Graph::<f64>::new();
        let f = g.leaf(Tensor::zeros(vec![1, 4, 6, 6]));
        let c = g.leaf(Tensor::zeros(vec![1, 4, 6, 6]));
        let k = g.leaf(Tensor::zeros(vec![1, 2, 7, 7]));
        let b = g.leaf(Tensor::zeros(vec![1]));
        let gate = attention_gate(&mut g, f, c, k, b).unwrap();
        assert!(g.value(gate).data().iter().all(|&v| v == 0.5));
        let out = spatial_attention(&mut g, f, c, k, b).unwrap();
        assert!(g.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saturated_gate_is_identity() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let feats = Tensor::<f64>::randn(vec![2, 3, 4, 4], &mut r);
        let mut g = Graph::new();
        let f = g.leaf(feats.clone());
        let ones = g.leaf(Tensor::full(vec![2, 1, 4, 4], 1.0));
        let out = g.gate(f, ones).unwrap();
        assert_eq!(g.value(out), &feats);
    }

    #[test]
    fn spatial_mismatch_is_contract_violation() {
        let mut g = Graph::<f64>::new();
        let f = g.leaf(Tensor::zeros(vec![1, 4, 6, 6]));
        let c = g.leaf(Tensor::zeros(vec![1, 4, 4, 4]));
        let k = g.leaf(Tensor::zeros(vec![1, 2, 7, 7]));
        let b = g.leaf(Tensor::zeros(vec![1]));
        assert!(matches!(attention_gate(&mut g, f, c, k, b), Err(Error::Contract(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn output_bounded_by_input(seed in 0u64..100_000) {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let mut g = Graph::<f64>::new();
            let fv = Tensor::randn(vec![1, 3, 5, 5], &mut r);
            let f = g.leaf(fv.clone());
            let c = g.leaf(Tensor::randn(vec![1, 2, 5, 5], &mut r));
            let k = g.leaf(Tensor::randn(vec![1, 2, 7, 7], &mut r));
            let b = g.leaf(Tensor::randn(vec![1], &mut r));
            let gate = attention_gate(&mut g, f, c, k, b).unwrap();
            prop_assert!(g.value(gate).data().iter().all(|&v| v > 0.0 && v <= 1.0));
            let out = g.gate(f, gate).unwrap();
            for (o, i) in g.value(out).data().iter().zip(fv.data()) {
                prop_assert!(o.abs() <= i.abs());
            }
        }
    }
}
