use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::scene::{build_dataset, Mode, SceneGenParams};

type T = Tensor<f64>;

fn pair(seed: u64, n: usize) -> (T, T) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = T::uniform(vec![1, 1, n, n], 0.5, &mut rng).map(|v| v + 0.5);
    let b = T::uniform(vec![1, 1, n, n], 0.5, &mut rng).map(|v| v + 0.5);
    (a, b)
}

fn loop_sq(pred: &T, target: &T) -> (f64, f64) {
    let (mut err, mut energy) = (0.0, 0.0);
    for i in 0..pred.len() {
        let d = pred.data()[i] - target.data()[i];
        err += d * d;
        energy += target.data()[i] * target.data()[i];
    }
    (err, energy)
}

/// SSIM straight from the definition: 2-D window, explicit mirrored
/// coordinates, centered second moments.
fn ssim_direct(x: &[f64], y: &[f64], h: usize, w: usize) -> f64 {
    let sigma: f64 = 1.5;
    let mut win = [[0.0f64; 11]; 11];
    let mut total = 0.0;
    for (i, row) in win.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            total += *v;
        }
    }
    let mirror = |mut i: i64, n: i64| {
        while i < 0 || i >= n {
            i = if i < 0 { -i - 1 } else { 2 * n - i - 1 };
        }
        i as usize
    };
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut acc = 0.0;
    for r in 0..h as i64 {
        for c in 0..w as i64 {
            let at = |img: &[f64], i: usize, j: usize| img[mirror(r + i as i64 - 5, h as i64) * w + mirror(c + j as i64 - 5, w as i64)];
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / total;
                    mx += k * at(x, i, j);
                    my += k * at(y, i, j);
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let k = win[i][j] / total;
                    let (a, b) = (at(x, i, j) - mx, at(y, i, j) - my);
                    vx += k * a * a;
                    vy += k * b * b;
                    cov += k * a * b;
                }
            }
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    acc / (h * w) as f64
}

#[test]
fn nmse_examples() {
    let (a, b) = pair(0, 8);
    assert_eq!(nmse(&b, &b).unwrap(), 0.0);
    assert_eq!(nmse(&T::zeros(vec![1, 1, 8, 8]), &b).unwrap(), 1.0);
    assert!(matches!(nmse(&a, &T::zeros(vec![1, 1, 8, 8])), Err(Error::Domain(_))));
    let (err, energy) = loop_sq(&a, &b);
    assert!((nmse(&a, &b).unwrap() - err / energy).abs() < 1e-12);
}

#[test]
fn rmse_examples() {
    let (a, b) = pair(1, 8);
    assert_eq!(rmse(&a, &a).unwrap(), 0.0);
    assert!((rmse(&b.map(|v| v + 0.1), &b).unwrap() - 0.1).abs() < 1e-12);
    let (err, _) = loop_sq(&a, &b);
    assert!((rmse(&a, &b).unwrap() - (err / 64.0).sqrt()).abs() < 1e-12);
}

#[test]
fn psnr_examples() {
    let target = T::full(vec![1, 1, 4, 4], 0.5);
    let pred = target.map(|v| v + 0.1);
    assert!((psnr(&pred, &target, 1.0).unwrap() - 20.0).abs() < 1e-9);
    assert_eq!(psnr(&target, &target, 1.0).unwrap(), PSNR_CAP_DB);
}

#[test]
fn ssim_examples() {
    let (a, b) = pair(2, 16);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    let neg = a.map(|v| 1.0 - v);
    assert!(ssim(&neg, &a).unwrap() < 1.0);
    assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    let small = T::zeros(vec![1, 1, 10, 10]);
    assert!(matches!(ssim(&small, &small), Err(Error::Domain(_))));
}

#[test]
fn reflect_index_repeats_edges() {
    let idx: Vec<usize> = (-3..8).map(|i| reflect_index(i, 5)).collect();
    assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 4, 4, 3, 2]);
}

#[test]
fn metrics_match_references_on_random_pairs() {
    for seed in 0..100 {
        let (a, b) = pair(100 + seed, 16);
        let (err, energy) = loop_sq(&a, &b);
        let r = MetricRow::compute("x", &a, &b).unwrap();
        assert!((r.nmse - err / energy).abs() < 1e-9);
        assert!((r.rmse - (err / 256.0).sqrt()).abs() < 1e-9);
        assert!((r.psnr_db - 10.0 * (256.0 / err).log10()).abs() < 1e-9);
        assert!((r.psnr_db + 20.0 * r.rmse.log10()).abs() < 1e-9);
        assert!((r.ssim - ssim_direct(a.data(), b.data(), 16, 16)).abs() < 1e-9);
        assert!((-1.0..=1.0).contains(&r.ssim));
    }
}

#[test]
fn report_aggregates_and_csv() {
    let params = SceneGenParams { size: 16, n_buildings: 2, ..Default::default() };
    let (train, test) = build_dataset(&params, 4, 3, Mode::Srm, 0).unwrap();
    let exact: Vec<T> = test.samples.iter().map(|s| s.target.clone()).collect();
    let perfect = evaluate_predictions(&test, &exact).unwrap();
    assert_eq!(perfect.aggregate.nmse, 0.0);
    assert!((perfect.aggregate.ssim - 1.0).abs() < 1e-12);
    assert_eq!(perfect.aggregate.psnr_db, PSNR_CAP_DB);

    let base = mean_predictor_baseline(&train, &test).unwrap();
    assert_eq!(base.count, 3);
    let mean = |f: fn(&MetricRow) -> f64| base.rows.iter().map(f).sum::<f64>() / 3.0;
    assert!((base.aggregate.nmse - mean(|r| r.nmse)).abs() < 1e-12);
    assert!((base.aggregate.ssim - mean(|r| r.ssim)).abs() < 1e-12);
    let ids: Vec<&str> = base.rows.iter().map(|r| r.sample_id.as_str()).collect();
    assert_eq!(ids, vec!["sample_00000", "sample_00001", "sample_00002"]);

    let csv = base.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("aggregate,"));
    let parsed: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(parsed, base.rows[0].nmse);

    assert!(evaluate_predictions(&test, &exact[..2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nmse_is_quadratic_in_error(seed in 0u64..10_000, k in -4.0f64..4.0) {
        let (a, b) = pair(seed, 8);
        let e = a.sub(&b).unwrap();
        let scaled = b.add(&e.scale(k)).unwrap();
        let lhs = nmse(&scaled, &b).unwrap();
        let rhs = k * k * nmse(&a, &b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn ssim_is_symmetric(seed in 0u64..10_000) {
        let (a, b) = pair(seed, 12);
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }
}
