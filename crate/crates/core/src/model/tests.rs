use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numeric::{finite_difference_grad, max_relative_error};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn tiny(cond: usize) -> ModelConfig {
    ModelConfig {
        variant: Variant::Lite,
        base_channels: 4,
        depth: 1,
        use_spatial_attention: true,
        cond_channels: cond,
        time_embed_dim: 4,
    }
}

/// Random binary-ish condition, Gaussian state.
fn inputs(b: usize, cond: usize, hw: usize, seed: u64) -> (Tensor<f64>, Tensor<f64>) {
    let mut r = rng(seed);
    let x = Tensor::randn(vec![b, 1, hw, hw], &mut r);
    let c = Tensor::uniform(vec![b, cond, hw, hw], 1.0, &mut r).map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    (x, c)
}

/// Perturb every parameter so that no gradient is structurally zero.
fn randomized(config: &ModelConfig, seed: u64) -> ModelState<f64> {
    let mut s = ModelState::<f64>::init(config, seed, false).unwrap();
    let mut r = rng(seed + 1);
    for t in s.params.tensors_mut() {
        let noise = Tensor::<f64>::uniform(t.shape().to_vec(), 0.3, &mut r);
        *t = t.add(&noise).unwrap();
    }
    s
}

#[test]
fn zero_condition_gives_bias_pattern() {
    let s = randomized(&ModelConfig::lite(2), 4);
    let zeros = Tensor::zeros(vec![3, 2, 8, 8]);
    let e = s.condition_embed(&zeros, Weights::Online).unwrap();
    let bias = s.params.get("cond_stem.bias").unwrap();
    let (b, c, h, w) = e.dims4().unwrap();
    for bi in 0..b {
        for ci in 0..c {
            for j in 0..h * w {
                assert_eq!(e.data()[(bi * c + ci) * h * w + j], bias.data()[ci]);
            }
        }
    }
}

#[test]
fn condition_channels_are_checked() {
    let drm = ModelState::<f64>::init(&ModelConfig::lite(3), 0, false).unwrap();
    let srm = ModelState::<f64>::init(&ModelConfig::lite(2), 0, false).unwrap();
    let c2 = Tensor::zeros(vec![1, 2, 8, 8]);
    assert!(srm.condition_embed(&c2, Weights::Online).is_ok());
    assert!(matches!(drm.condition_embed(&c2, Weights::Online), Err(Error::Config(_))));
}

#[test]
fn batch_permutation_permutes_outputs() {
    let s = randomized(&ModelConfig::lite(2), 9);
    let (x, c) = inputs(3, 2, 8, 10);
    let t = [0.1, 0.5, 0.9];
    let perm = [2usize, 0, 1];
    let pick = |src: &Tensor<f64>| Tensor::stack(&perm.map(|i| src.batch_item(i).unwrap())).unwrap();
    let e = s.condition_embed(&c, Weights::Online).unwrap();
    let e_p = s.condition_embed(&pick(&c), Weights::Online).unwrap();
    assert_eq!(pick(&e), e_p);
    let v = s.forward(&x, &t, &c, Weights::Online).unwrap();
    let v_p = s.forward(&pick(&x), &perm.map(|i| t[i]), &pick(&c), Weights::Online).unwrap();
    assert_eq!(pick(&v), v_p);
}

#[test]
fn forward_is_deterministic_with_expected_shape() {
    let a = ModelState::<f64>::init(&ModelConfig::lite(2), 42, true).unwrap();
    let b = ModelState::<f64>::init(&ModelConfig::lite(2), 42, true).unwrap();
    let (x, c) = inputs(2, 2, 32, 1);
    let va = a.forward(&x, &[0.3, 0.7], &c, Weights::Online).unwrap();
    let vb = b.forward(&x, &[0.3, 0.7], &c, Weights::Online).unwrap();
    assert_eq!(va.shape(), &[2, 1, 32, 32]);
    assert_eq!(va, vb);
    assert_eq!(va, a.forward(&x, &[0.3, 0.7], &c, Weights::Online).unwrap());
}

#[test]
fn initial_field_is_small() {
    let s = ModelState::<f64>::init(&ModelConfig::lite(2), 3, false).unwrap();
    let (x, c) = inputs(1, 2, 16, 2);
    let v = s.forward(&x, &[0.5], &c, Weights::Online).unwrap();
    let rms = (v.sq_norm() / v.len() as f64).sqrt();
    assert!(rms < 0.1, "initial rms {rms}");
}

#[test]
fn spatial_size_must_divide() {
    let s = ModelState::<f64>::init(&ModelConfig::lite(2), 0, false).unwrap();
    let (x, c) = inputs(1, 2, 10, 0);
    assert!(matches!(s.forward(&x, &[0.0], &c, Weights::Online), Err(Error::Config(_))));
}

#[test]
fn parameter_counts() {
    let lite = ModelState::<f64>::init(&ModelConfig::lite(2), 0, false).unwrap();
    let full = ModelState::<f64>::init(&ModelConfig::full(2), 0, false).unwrap();
    assert!(lite.count_parameters() < full.count_parameters());

    let mut single = ParamSet::<f64>::new();
    single.push("w", Tensor::zeros(vec![1, 1, 1, 1]));
    single.push("b", Tensor::zeros(vec![1]));
    assert_eq!(single.count(), 2);

    // Doubling the width at depth 1: the C² terms dominate, the C-linear
    // terms (stem, input, output and attention) pull the ratio below 4.
    let conv_count = |base: usize| {
        let mut c = tiny(2);
        c.base_channels = base;
        let s = ModelState::<f64>::init(&c, 0, false).unwrap();
        s.params
            .iter()
            .filter(|(n, t)| n.ends_with(".weight") && t.shape().len() == 4)
            .map(|(_, t)| t.len())
            .sum::<usize>()
    };
    let ratio = conv_count(32) as f64 / conv_count(16) as f64;
    assert!((3.7..4.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn every_parameter_gets_gradient_at_init() {
    for config in [ModelConfig::lite(2), tiny(3)] {
        let s = ModelState::<f64>::init(&config, 5, false).unwrap();
        let (x, c) = inputs(2, config.cond_channels, 8, 6);
        let target = Tensor::randn(vec![2, 1, 8, 8], &mut rng(7));
        let mut g = Graph::new();
        let p = s.net().bind(&mut g, &s.params);
        let xv = g.leaf(x);
        let cv = g.leaf(c);
        let tv = g.leaf(target);
        let v = s.net().forward(&mut g, &p, xv, &[0.2, 0.8], cv).unwrap();
        let l = g.mse(v, tv).unwrap();
        let grads = g.backward(l).unwrap();
        for (name, &var) in s.params.names().iter().zip(&p) {
            let gn = grads.get(var).sq_norm();
            assert!(gn > 0.0, "{name} has zero gradient");
        }
    }
}

#[test]
fn tiny_model_gradients_match_finite_differences() {
    let config = tiny(2);
    let s = randomized(&config, 12);
    let (x, c) = inputs(2, 2, 4, 13);
    let target = Tensor::randn(vec![2, 1, 4, 4], &mut rng(14));
    let times = [0.25, 0.6];
    let loss_with = |params: &ParamSet<f64>| {
        let mut g = Graph::new();
        let p = s.net().bind(&mut g, params);
        let xv = g.leaf(x.clone());
        let cv = g.leaf(c.clone());
        let tv = g.leaf(target.clone());
        let v = s.net().forward(&mut g, &p, xv, &times, cv).unwrap();
        let l = g.mse(v, tv).unwrap();
        (g, p, l)
    };
    let (g, p, l) = loss_with(&s.params);
    let grads = g.backward(l).unwrap();
    for (i, name) in s.params.names().iter().enumerate() {
        let numeric = finite_difference_grad(
            |t| {
                let mut params = s.params.clone();
                params.tensors_mut()[i] = t.clone();
                let (g, _, l) = loss_with(&params);
                g.value(l).data()[0]
            },
            &s.params.tensors()[i],
            1e-5,
        );
        let err = max_relative_error(&grads.get(p[i]), &numeric, 1e-7);
        assert!(err < 1e-3, "{name}: {err:e}");
    }
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let mut s = randomized(&ModelConfig::lite(3).with_spatial_attention(false), 1);
    s.ema = Some(randomized(&ModelConfig::lite(3).with_spatial_attention(false), 2).params);
    let bytes = checkpoint::encode(&s).unwrap();
    let back: ModelState<f64> = checkpoint::decode(&bytes).unwrap();
    assert_eq!(back.config, s.config);
    assert_eq!(back.params, s.params);
    assert_eq!(back.ema, s.ema);

    assert!(checkpoint::decode::<f64>(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(checkpoint::decode::<f64>(&bad), Err(Error::Checkpoint(_))));

    let no_ema = ModelState::<f64>::init(&ModelConfig::lite(2), 0, false).unwrap();
    let back: ModelState<f64> = checkpoint::decode(&checkpoint::encode(&no_ema).unwrap()).unwrap();
    assert!(back.ema.is_none());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rfck");
    checkpoint::save(&s, &path).unwrap();
    let loaded: ModelState<f64> = checkpoint::load(&path).unwrap();
    assert_eq!(loaded.params, s.params);
    assert!(!dir.path().join("m.rfck.tmp").exists());
}

#[test]
fn runs_in_single_precision() {
    let s = ModelState::<f32>::init(&ModelConfig::lite(2), 0, true).unwrap();
    let x = Tensor::<f32>::randn(vec![1, 1, 8, 8], &mut rng(0));
    let c = Tensor::<f32>::zeros(vec![1, 2, 8, 8]);
    let v = s.forward(&x, &[0.5], &c, Weights::Ema).unwrap();
    assert!(v.is_finite());
}
