//! Dense tensors and reverse-mode differentiation.

pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod tensor;

pub use gradcheck::{finite_difference_grad, max_relative_error, relative_error};
pub use graph::{sigmoid, Grads, Graph, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type T = Tensor<f64>;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Direct nested-loop convolution used as the oracle.
    fn naive_conv(x: &T, k: &T, stride: usize, pad: usize) -> T {
        let (b, cin, h, w) = x.dims4().unwrap();
        let (cout, _, kh, kw) = k.dims4().unwrap();
        let oh = (h + 2 * pad - kh) / stride + 1;
        let ow = (w + 2 * pad - kw) / stride + 1;
        let mut out = vec![0.0; b * cout * oh * ow];
        for n in 0..b {
            for co in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                        continue;
                                    }
                                    acc += x.data()[((n * cin + ci) * h + iy as usize) * w + ix as usize]
                                        * k.data()[((co * cin + ci) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        out[((n * cout + co) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        T::new(vec![b, cout, oh, ow], out).unwrap()
    }

    fn conv(x: &T, k: &T, stride: usize, pad: usize) -> T {
        let mut g = Graph::new();
        let (xv, kv) = (g.leaf(x.clone()), g.leaf(k.clone()));
        let y = g.conv2d(xv, kv, None, stride, pad).unwrap();
        g.value(y).clone()
    }

    #[test]
    fn conv_one_by_one_scales() {
        let x = T::full(vec![1, 1, 3, 3], 1.0);
        let k = T::full(vec![1, 1, 1, 1], 2.0);
        let y = conv(&x, &k, 1, 0);
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        assert!(y.data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn conv_delta_kernel_is_identity() {
        let x = T::randn(vec![1, 1, 3, 3], &mut rng(3));
        let mut k = T::zeros(vec![1, 1, 3, 3]);
        k.data_mut()[4] = 1.0;
        assert_eq!(conv(&x, &k, 1, 1), x);
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut r = rng(11);
        let x = T::randn(vec![2, 3, 8, 8], &mut r);
        let k = T::randn(vec![4, 3, 3, 3], &mut r);
        for (stride, pad) in [(1, 1), (1, 0), (2, 1), (2, 0)] {
            let got = conv(&x, &k, stride, pad);
            let want = naive_conv(&x, &k, stride, pad);
            assert_eq!(got.shape(), want.shape());
            assert!(got.max_abs_diff(&want).unwrap() < 1e-12, "stride {stride} pad {pad}");
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(T::zeros(vec![1, 2, 4, 4]));
        let k = g.leaf(T::zeros(vec![1, 3, 3, 3]));
        assert!(matches!(g.conv2d(x, k, None, 1, 1), Err(crate::Error::Config(_))));
        let k_even = g.leaf(T::zeros(vec![1, 2, 2, 2]));
        assert!(g.conv2d(x, k_even, None, 1, 0).is_err());
    }

    #[test]
    fn elementwise_examples() {
        let mut g = Graph::<f64>::new();
        let z = g.leaf(T::zeros(vec![1]));
        let s = g.sigmoid(z);
        assert_eq!(g.value(s).data(), &[0.5]);

        let c = g.leaf(T::full(vec![1, 8, 2, 2], 3.7));
        let gamma = g.leaf(T::full(vec![8], 1.0));
        let beta = g.leaf(T::zeros(vec![8]));
        let n = g.group_norm(c, gamma, beta, 8, 1e-5).unwrap();
        assert!(g.value(n).data().iter().all(|&v| v == 0.0));

        let x = T::randn(vec![1, 4, 2, 2], &mut rng(5));
        let xv = g.leaf(x.clone());
        let m = g.mean_over_channels(xv).unwrap();
        for j in 0..4 {
            let mut acc = 0.0;
            for c in 0..4 {
                acc += x.data()[c * 4 + j];
            }
            assert!((g.value(m).data()[j] - acc / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn incompatible_shapes_are_config_errors() {
        let mut g = Graph::<f64>::new();
        let a = g.leaf(T::zeros(vec![2, 3]));
        let b = g.leaf(T::zeros(vec![3, 2]));
        assert!(g.add(a, b).is_err());
        assert!(g.mul(a, b).is_err());
        let c = g.leaf(T::zeros(vec![4, 2]));
        assert!(g.matmul(a, c).is_err());
        assert!(g.matmul(a, b).is_ok());
    }

    #[test]
    fn backward_simple_examples() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(T::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).data(), &[1.0, 1.0, 1.0]);

        let sq = g.mul(x, x).unwrap();
        let l = g.sum(sq);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(x).data(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_and_zeros_unused_leaves() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(T::full(vec![2], 1.0));
        let unused = g.leaf(T::full(vec![5], 1.0));
        let y = g.scale(x, 2.0);
        assert!(matches!(g.backward(y), Err(crate::Error::Contract(_))));
        let l = g.sum(y);
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(unused), T::zeros(vec![5]));
    }

    /// Build a scalar loss from a single input through `f`, returning the
    /// analytic and finite-difference gradients for that input.
    fn check_op(x: &T, f: impl Fn(&mut Graph<f64>, Var) -> Var) -> f64 {
        let mut g = Graph::new();
        let xv = g.leaf(x.clone());
        let y = f(&mut g, xv);
        let w = T::randn(g.shape(y).to_vec(), &mut rng(99));
        let wv = g.leaf(w.clone());
        let p = g.mul(y, wv).unwrap();
        let l = g.sum(p);
        let analytic = g.backward(l).unwrap().get(xv);
        let numeric = finite_difference_grad(
            |t| {
                let mut g = Graph::new();
                let xv = g.leaf(t.clone());
                let y = f(&mut g, xv);
                let wv = g.leaf(w.clone());
                let p = g.mul(y, wv).unwrap();
                let l = g.sum(p);
                g.value(l).data()[0]
            },
            x,
            1e-5,
        );
        max_relative_error(&analytic, &numeric, 1e-6)
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut r = rng(21);
        let x4 = T::randn(vec![2, 4, 4, 4], &mut r);
        let k = T::randn(vec![3, 4, 3, 3], &mut r);
        let bias = T::randn(vec![3], &mut r);
        let gamma = T::randn(vec![4], &mut r);
        let beta = T::randn(vec![4], &mut r);
        let other = T::randn(vec![2, 4, 4, 4], &mut r);
        let gate = T::randn(vec![2, 1, 4, 4], &mut r);
        let film_s = T::randn(vec![2, 4], &mut r);
        let film_b = T::randn(vec![2, 4], &mut r);
        let mat = T::randn(vec![3, 5], &mut r);
        let x2 = T::randn(vec![4, 3], &mut r);
        let row_bias = T::randn(vec![5], &mut r);
        let tol = 1e-3;

        type OpFn = Box<dyn Fn(&mut Graph<f64>, Var) -> Var>;
        let cases: Vec<(&str, &T, OpFn)> = vec![
            ("conv2d", &x4, Box::new({
                let (k, b) = (k.clone(), bias.clone());
                move |g, x| {
                    let kv = g.leaf(k.clone());
                    let bv = g.leaf(b.clone());
                    g.conv2d(x, kv, Some(bv), 1, 1).unwrap()
                }
            })),
            ("conv2d_stride2", &x4, Box::new({
                let k = k.clone();
                move |g, x| {
                    let kv = g.leaf(k.clone());
                    g.conv2d(x, kv, None, 2, 1).unwrap()
                }
            })),
            ("add", &x4, Box::new({
                let o = other.clone();
                move |g, x| {
                    let ov = g.leaf(o.clone());
                    g.add(x, ov).unwrap()
                }
            })),
            ("sub", &x4, Box::new({
                let o = other.clone();
                move |g, x| {
                    let ov = g.leaf(o.clone());
                    g.sub(ov, x).unwrap()
                }
            })),
            ("mul_self", &x4, Box::new(|g, x| g.mul(x, x).unwrap())),
            ("scale", &x4, Box::new(|g, x| g.scale(x, -1.7))),
            ("sigmoid", &x4, Box::new(|g, x| g.sigmoid(x))),
            ("silu", &x4, Box::new(|g, x| g.silu(x))),
            ("mean", &x4, Box::new(|g, x| g.mean(x))),
            ("max_over_channels", &x4, Box::new(|g, x| g.max_over_channels(x).unwrap())),
            ("mean_over_channels", &x4, Box::new(|g, x| g.mean_over_channels(x).unwrap())),
            ("upsample", &x4, Box::new(|g, x| g.upsample_nearest_2x(x).unwrap())),
            ("downsample", &x4, Box::new(|g, x| g.downsample_avg_2x(x).unwrap())),
            ("group_norm", &x4, Box::new({
                let (ga, be) = (gamma.clone(), beta.clone());
                move |g, x| {
                    let gv = g.leaf(ga.clone());
                    let bv = g.leaf(be.clone());
                    g.group_norm(x, gv, bv, 2, 1e-5).unwrap()
                }
            })),
            ("concat", &x4, Box::new({
                let o = other.clone();
                move |g, x| {
                    let ov = g.leaf(o.clone());
                    g.concat_channels(ov, x).unwrap()
                }
            })),
            ("gate_input", &x4, Box::new({
                let gt = gate.clone();
                move |g, x| {
                    let gv = g.leaf(gt.clone());
                    g.gate(x, gv).unwrap()
                }
            })),
            ("gate_gate", &gate, Box::new({
                let o = other.clone();
                move |g, x| {
                    let ov = g.leaf(o.clone());
                    g.gate(ov, x).unwrap()
                }
            })),
            ("film_input", &x4, Box::new({
                let (s, b) = (film_s.clone(), film_b.clone());
                move |g, x| {
                    let sv = g.leaf(s.clone());
                    let bv = g.leaf(b.clone());
                    g.film(x, sv, bv).unwrap()
                }
            })),
            ("film_scale", &film_s, Box::new({
                let (o, b) = (other.clone(), film_b.clone());
                move |g, x| {
                    let ov = g.leaf(o.clone());
                    let bv = g.leaf(b.clone());
                    g.film(ov, x, bv).unwrap()
                }
            })),
            ("matmul_lhs", &x2, Box::new({
                let m = mat.clone();
                move |g, x| {
                    let mv = g.leaf(m.clone());
                    g.matmul(x, mv).unwrap()
                }
            })),
            ("matmul_rhs", &mat, Box::new({
                let a = x2.clone();
                move |g, x| {
                    let av = g.leaf(a.clone());
                    g.matmul(av, x).unwrap()
                }
            })),
            ("add_bias", &row_bias, Box::new({
                let (a, m) = (x2.clone(), mat.clone());
                move |g, x| {
                    let av = g.leaf(a.clone());
                    let mv = g.leaf(m.clone());
                    let y = g.matmul(av, mv).unwrap();
                    g.add_bias(y, x).unwrap()
                }
            })),
        ];
        for (name, x, f) in &cases {
            let err = check_op(x, f);
            assert!(err < tol, "{name}: max relative error {err:e}");
        }
    }

    #[test]
    fn group_norm_affine_gradients() {
        let mut r = rng(8);
        let x = T::randn(vec![2, 4, 3, 3], &mut r);
        let gamma = T::randn(vec![4], &mut r);
        let beta = T::randn(vec![4], &mut r);
        let w = T::randn(vec![2, 4, 3, 3], &mut r);
        let loss = |ga: &T, be: &T| {
            let mut g = Graph::new();
            let xv = g.leaf(x.clone());
            let gv = g.leaf(ga.clone());
            let bv = g.leaf(be.clone());
            let wv = g.leaf(w.clone());
            let y = g.group_norm(xv, gv, bv, 2, 1e-5).unwrap();
            let p = g.mul(y, wv).unwrap();
            let l = g.sum(p);
            (g, gv, bv, l)
        };
        let (g, gv, bv, l) = loss(&gamma, &beta);
        let grads = g.backward(l).unwrap();
        let num_g = finite_difference_grad(|t| { let (g, _, _, l) = loss(t, &beta); g.value(l).data()[0] }, &gamma, 1e-5);
        let num_b = finite_difference_grad(|t| { let (g, _, _, l) = loss(&gamma, t); g.value(l).data()[0] }, &beta, 1e-5);
        assert!(max_relative_error(&grads.get(gv), &num_g, 1e-6) < 1e-3);
        assert!(max_relative_error(&grads.get(bv), &num_b, 1e-6) < 1e-3);
    }

    #[test]
    fn two_layer_conv_net_matches_finite_differences() {
        let mut r = rng(31);
        let x = T::randn(vec![2, 2, 6, 6], &mut r);
        let k1 = T::randn(vec![3, 2, 3, 3], &mut r).scale(0.5);
        let b1 = T::randn(vec![3], &mut r);
        let k2 = T::randn(vec![1, 3, 3, 3], &mut r).scale(0.5);
        let b2 = T::randn(vec![1], &mut r);
        let target = T::randn(vec![2, 1, 6, 6], &mut r);
        let params = [k1, b1, k2, b2];
        let net = |p: &[T]| {
            let mut g = Graph::new();
            let xv = g.leaf(x.clone());
            let vs: Vec<Var> = p.iter().map(|t| g.leaf(t.clone())).collect();
            let h = g.conv2d(xv, vs[0], Some(vs[1]), 1, 1).unwrap();
            let h = g.silu(h);
            let y = g.conv2d(h, vs[2], Some(vs[3]), 1, 1).unwrap();
            let tv = g.leaf(target.clone());
            let l = g.mse(y, tv).unwrap();
            (g, vs, l)
        };
        let (g, vs, l) = net(&params);
        let grads = g.backward(l).unwrap();
        for i in 0..params.len() {
            let numeric = finite_difference_grad(
                |t| {
                    let mut p = params.clone();
                    p[i] = t.clone();
                    let (g, _, l) = net(&p);
                    g.value(l).data()[0]
                },
                &params[i],
                1e-5,
            );
            let err = max_relative_error(&grads.get(vs[i]), &numeric, 1e-6);
            assert!(err < 1e-3, "param {i}: {err:e}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn conv_is_linear_in_input_and_kernel(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut r = rng(seed);
            let x = T::randn(vec![1, 2, 5, 5], &mut r);
            let y = T::randn(vec![1, 2, 5, 5], &mut r);
            let k = T::randn(vec![3, 2, 3, 3], &mut r);
            let j = T::randn(vec![3, 2, 3, 3], &mut r);
            let mix = x.scale(a).add(&y.scale(b)).unwrap();
            let lhs = conv(&mix, &k, 1, 1);
            let rhs = conv(&x, &k, 1, 1).scale(a).add(&conv(&y, &k, 1, 1).scale(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
            let kmix = k.scale(a).add(&j.scale(b)).unwrap();
            let lhs = conv(&x, &kmix, 1, 1);
            let rhs = conv(&x, &k, 1, 1).scale(a).add(&conv(&x, &j, 1, 1).scale(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        }

        #[test]
        fn backward_is_additive_over_losses(seed in 0u64..10_000) {
            let mut r = rng(seed);
            let x = T::randn(vec![1, 2, 4, 4], &mut r);
            let k = T::randn(vec![2, 2, 3, 3], &mut r);
            let build = |which: u8| {
                let mut g = Graph::new();
                let xv = g.leaf(x.clone());
                let kv = g.leaf(k.clone());
                let y = g.conv2d(xv, kv, None, 1, 1).unwrap();
                let s = g.sigmoid(y);
                let l1 = g.mean(s);
                let sq = g.mul(y, y).unwrap();
                let l2 = g.sum(sq);
                let l = match which {
                    0 => l1,
                    1 => l2,
                    _ => g.add(l1, l2).unwrap(),
                };
                g.backward(l).unwrap().get(kv)
            };
            let sum = build(0).add(&build(1)).unwrap();
            prop_assert!(sum.max_abs_diff(&build(2)).unwrap() < 1e-10);
        }
    }

    #[test]
    fn forward_values_are_finite() {
        let mut g = Graph::<f64>::new();
        let x = g.leaf(T::full(vec![1, 1, 2, 2], 800.0));
        let s = g.sigmoid(x);
        let neg = g.scale(x, -1.0);
        let s2 = g.silu(neg);
        assert!(g.value(s).is_finite() && g.value(s2).is_finite());
    }
}
