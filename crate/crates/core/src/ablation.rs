//! Guidance, step-count and module sweeps over a trained model.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::evaluate;
use crate::model::{ModelConfig, ModelState};
use crate::sample::SampleConfig;
use crate::scene::Dataset;
use crate::train::{train, TrainConfig};

/// `0`, then `1.0, 1.5, …, 6.0`.
pub fn cfg_sweep_values() -> Vec<f64> {
    std::iter::once(0.0).chain((0..=10).map(|k| 1.0 + 0.5 * k as f64)).collect()
}

pub const STEPS_SWEEP: [usize; 5] = [1, 5, 10, 20, 50];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub nmse: f64,
    pub psnr: f64,
    pub rmse: f64,
}

fn row(label: String, state: &ModelState<f64>, test: &Dataset, cfg: &SampleConfig) -> Result<SweepRow> {
    let r = evaluate(state, test, cfg)?.aggregate;
    Ok(SweepRow { label, nmse: r.nmse, psnr: r.psnr_db, rmse: r.rmse })
}

/// CSV with the given first column name, then `nmse,psnr,rmse`.
pub fn sweep_csv(key: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{key},nmse,psnr,rmse\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.label, r.nmse, r.psnr, r.rmse);
    }
    out
}

/// One row per guidance scale; other sampling settings from `base`.
pub fn cfg_sweep(state: &ModelState<f64>, test: &Dataset, base: &SampleConfig) -> Result<Vec<SweepRow>> {
    cfg_sweep_values()
        .into_iter()
        .map(|w| row(format!("{w:.1}"), state, test, &SampleConfig { guidance: w, ..base.clone() }))
        .collect()
}

pub fn steps_sweep(state: &ModelState<f64>, test: &Dataset, base: &SampleConfig) -> Result<Vec<SweepRow>> {
    STEPS_SWEEP
        .iter()
        .map(|&steps| row(steps.to_string(), state, test, &SampleConfig { steps, ..base.clone() }))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModuleArm {
    NoEma,
    NoSpatialAttention,
    EmaAndSpatialAttention,
}

impl ModuleArm {
    pub const ALL: [ModuleArm; 3] = [ModuleArm::NoEma, ModuleArm::NoSpatialAttention, ModuleArm::EmaAndSpatialAttention];

    pub fn label(self) -> &'static str {
        match self {
            ModuleArm::NoEma => "w/o EMA",
            ModuleArm::NoSpatialAttention => "w/o SA",
            ModuleArm::EmaAndSpatialAttention => "w/ EMA + SA",
        }
    }

    /// Model, training and sampling settings for this arm.
    pub fn configure(
        self,
        model: &ModelConfig,
        train: &TrainConfig,
        sample: &SampleConfig,
    ) -> (ModelConfig, TrainConfig, SampleConfig) {
        let (sa, ema) = match self {
            ModuleArm::NoEma => (true, false),
            ModuleArm::NoSpatialAttention => (false, true),
            ModuleArm::EmaAndSpatialAttention => (true, true),
        };
        (
            model.clone().with_spatial_attention(sa),
            TrainConfig { track_ema: ema, ..train.clone() },
            SampleConfig { use_ema: ema, ..sample.clone() },
        )
    }
}

/// Retrains each arm from scratch and evaluates it.
pub fn modules_sweep(
    train_set: &Dataset,
    test: &Dataset,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
    sample: &SampleConfig,
) -> Result<Vec<SweepRow>> {
    ModuleArm::ALL
        .iter()
        .map(|arm| {
            let (m, t, s) = arm.configure(model, train_cfg, sample);
            let out = train::<f64>(train_set, None, &m, &t, None)?;
            row(arm.label().to_string(), &out.state, test, &s)
        })
        .collect()
}
