//! Image-quality metrics on normalized maps and the evaluation report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::numeric::Tensor;
use crate::sample::{batch_sample, LatencyStats, SampleConfig};
use crate::scene::Dataset;

/// PSNR reported for a zero-error prediction.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<()> {
    pred.check_same_shape(target).map_err(|e| Error::Contract(e.to_string()))
}

/// `‖pred − target‖² / ‖target‖²`.
pub fn nmse(pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<f64> {
    same_shape(pred, target)?;
    let energy = target.sq_norm();
    if energy == 0.0 {
        return Err(Error::Domain("NMSE is undefined for an all-zero target".into()));
    }
    Ok(pred.sub(target)?.sq_norm() / energy)
}

pub fn mse(pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<f64> {
    same_shape(pred, target)?;
    if target.is_empty() {
        return Err(Error::Contract("empty maps".into()));
    }
    Ok(pred.sub(target)?.sq_norm() / target.len() as f64)
}

pub fn rmse(pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<f64> {
    Ok(mse(pred, target)?.sqrt())
}

/// `10·log10(peak²/mse)`, or [`PSNR_CAP_DB`] when the error is zero.
pub fn psnr(pred: &Tensor<f64>, target: &Tensor<f64>, peak: f64) -> Result<f64> {
    let m = mse(pred, target)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok(10.0 * (peak * peak / m).log10())
}

/// Normalized 1-D Gaussian taps of length [`SSIM_WINDOW`].
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - r;
        *t = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Mirror index with the edge sample repeated: `… b a | a b … y z | z y …`.
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

fn blur(img: &[f64], h: usize, w: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut rows = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * img[y * w + reflect_index(x as isize + k as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[reflect_index(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

fn map_dims(t: &Tensor<f64>) -> Result<(usize, usize)> {
    let s = t.shape();
    if s.len() < 2 || s[..s.len() - 2].iter().product::<usize>() != 1 {
        return Err(Error::Contract(format!("expected a single map, got shape {s:?}")));
    }
    Ok((s[s.len() - 2], s[s.len() - 1]))
}

/// Mean of the SSIM map with an 11×11 Gaussian window (σ = 1.5), `L = 1`,
/// population moments and mirrored borders.
pub fn ssim(pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<f64> {
    same_shape(pred, target)?;
    let (h, w) = map_dims(target)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Domain(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")));
    }
    let taps = gaussian_taps();
    let (x, y) = (pred.data(), target.data());
    let prod = |f: fn(f64, f64) -> f64| -> Vec<f64> { x.iter().zip(y).map(|(&a, &b)| f(a, b)).collect() };
    let mu_x = blur(x, h, w, &taps);
    let mu_y = blur(y, h, w, &taps);
    let xx = blur(&prod(|a, _| a * a), h, w, &taps);
    let yy = blur(&prod(|_, b| b * b), h, w, &taps);
    let xy = blur(&prod(|a, b| a * b), h, w, &taps);
    let (c1, c2) = (SSIM_K1 * SSIM_K1, SSIM_K2 * SSIM_K2);
    let total: f64 = (0..h * w)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = xx[i] - mx * mx;
            let vy = yy[i] - my * my;
            let cov = xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / (h * w) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sample_id: String,
    pub nmse: f64,
    pub psnr_db: f64,
    pub rmse: f64,
    pub ssim: f64,
}

impl MetricRow {
    pub fn compute(sample_id: impl Into<String>, pred: &Tensor<f64>, target: &Tensor<f64>) -> Result<Self> {
        Ok(Self {
            sample_id: sample_id.into(),
            nmse: nmse(pred, target)?,
            psnr_db: psnr(pred, target, 1.0)?,
            rmse: rmse(pred, target)?,
            ssim: ssim(pred, target)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<MetricRow>,
    pub aggregate: MetricRow,
    pub count: usize,
    pub latency: Option<LatencyStats>,
}

pub const CSV_HEADER: &str = "sample_id,nmse,psnr_db,rmse,ssim";

impl EvalReport {
    /// Aggregates are arithmetic means of the rows.
    pub fn from_rows(rows: Vec<MetricRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Contract("an evaluation needs at least one sample".into()));
        }
        let n = rows.len() as f64;
        let mean = |f: fn(&MetricRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        let aggregate = MetricRow {
            sample_id: "aggregate".into(),
            nmse: mean(|r| r.nmse),
            psnr_db: mean(|r| r.psnr_db),
            rmse: mean(|r| r.rmse),
            ssim: mean(|r| r.ssim),
        };
        Ok(Self { count: rows.len(), rows, aggregate, latency: None })
    }

    /// One row per sample in dataset order, then an `aggregate` row. PSNR of
    /// a zero-error sample is written as the 99 dB cap.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in self.rows.iter().chain(std::iter::once(&self.aggregate)) {
            let _ = writeln!(out, "{},{},{},{},{}", r.sample_id, r.nmse, r.psnr_db, r.rmse, r.ssim);
        }
        out
    }
}

/// Scores predictions against the dataset targets, in dataset order.
pub fn evaluate_predictions(data: &Dataset, predictions: &[Tensor<f64>]) -> Result<EvalReport> {
    if predictions.len() != data.len() {
        return Err(Error::Contract(format!("{} predictions for {} samples", predictions.len(), data.len())));
    }
    let rows = data
        .samples
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (s, p))| MetricRow::compute(sample_id(data, i), p, &s.target))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_rows(rows)
}

fn sample_id(data: &Dataset, i: usize) -> String {
    data.manifest
        .files
        .get(i)
        .map(|f| f.trim_end_matches(".rflw").to_string())
        .unwrap_or_else(|| format!("{i}"))
}

/// Samples every test scene with the model and scores the clamped output.
pub fn evaluate(state: &ModelState<f64>, test: &Dataset, config: &SampleConfig) -> Result<EvalReport> {
    let conds: Vec<Tensor<f64>> = test.samples.iter().map(|s| s.condition.clone()).collect();
    let out = batch_sample(state, &conds, config)?;
    let preds: Vec<Tensor<f64>> = out.outputs.into_iter().map(|o| o.clamped).collect();
    let mut report = evaluate_predictions(test, &preds)?;
    report.latency = Some(out.latency);
    Ok(report)
}

/// Predicts the per-pixel mean training map for every test scene.
pub fn mean_predictor_baseline(train: &Dataset, test: &Dataset) -> Result<EvalReport> {
    let mean = train.mean_target()?;
    evaluate_predictions(test, &vec![mean; test.len()])
}

#[cfg(test)]
mod tests;
