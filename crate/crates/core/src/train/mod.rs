//! Flow-matching training: condition dropout, AdamW, EMA shadowing, a
//! warmup + cosine learning-rate schedule, validation and checkpoints.

mod optim;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optim::{clip_global_norm, ema_update, AdamW};

use crate::error::{Error, Result};
use crate::flow::{cfm_loss_graph, kinetic_energy, FlowSample, PathSchedule};
use crate::metrics::nmse;
use crate::model::{checkpoint, ModelConfig, ModelState, Weights};
use crate::numeric::{Graph, Tensor};
use crate::sample::{sample_model, SampleConfig};
use crate::scalar::Scalar;
use crate::scene::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Peak learning rate `η`.
    pub lr: f64,
    pub warmup_steps: usize,
    pub ema_decay: f64,
    pub track_ema: bool,
    pub p_uncond: f64,
    pub weight_decay: f64,
    /// Global gradient-norm bound; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
    /// Validate every this many epochs (and after the last); 0 disables.
    pub val_interval: usize,
    /// Save a checkpoint every this many epochs (and after the last).
    pub save_interval: usize,
    pub path: PathSchedule,
    /// Time samples for the kinetic-energy diagnostic at each validation.
    pub kinetic_samples: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 8,
            lr: 2e-3,
            warmup_steps: 100,
            ema_decay: 0.999,
            track_ema: true,
            p_uncond: 0.1,
            weight_decay: 0.0,
            grad_clip: Some(1.0),
            seed: 0,
            val_interval: 5,
            save_interval: 5,
            path: PathSchedule::default(),
            kinetic_samples: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return Err(Error::Config(format!("ema decay must lie in (0, 1), got {}", self.ema_decay)));
        }
        if !(0.0..1.0).contains(&self.p_uncond) {
            return Err(Error::Config(format!("p_uncond must lie in [0, 1), got {}", self.p_uncond)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config("weight decay must be ≥ 0".into()));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::Config("gradient clip must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n_samples: usize) -> usize {
        n_samples.div_ceil(self.batch_size)
    }
}

/// Linear ramp `0 → peak` over `warmup` steps, then half-cosine down to 0 at
/// `total`. Continuous at `warmup`.
pub fn lr_schedule(step: usize, peak: f64, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return peak * step as f64 / warmup as f64;
    }
    if total <= warmup {
        return peak;
    }
    let progress = ((step - warmup) as f64 / (total - warmup) as f64).min(1.0);
    peak * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// The null condition with probability `p_uncond`, else `c` unchanged.
/// The flag reports whether the condition was dropped.
pub fn cfg_dropout<S: Scalar, R: Rng + ?Sized>(c: &Tensor<S>, p_uncond: f64, rng: &mut R) -> (Tensor<S>, bool) {
    if rng.random::<f64>() < p_uncond {
        (Tensor::zeros(c.shape().to_vec()), true)
    } else {
        (c.clone(), false)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValRecord {
    pub step: usize,
    pub epoch: usize,
    pub nmse: f64,
    pub kinetic_energy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub validations: Vec<ValRecord>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }

    /// Mean step loss of each epoch, in order.
    pub fn epoch_losses(&self) -> Vec<f64> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for s in &self.steps {
            if out.len() < s.epoch {
                out.resize(s.epoch, (0.0, 0));
            }
            let e = &mut out[s.epoch - 1];
            e.0 += s.loss;
            e.1 += 1;
        }
        out.into_iter().filter(|e| e.1 > 0).map(|(s, n)| s / n as f64).collect()
    }

    /// `step,loss,lr,val_nmse`; `val_nmse` is empty on steps without a validation.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,lr,val_nmse\n");
        for s in &self.steps {
            let val = self.validations.iter().find(|v| v.step == s.step);
            let _ = write!(out, "{},{},{},", s.step, s.loss, s.lr);
            if let Some(v) = val {
                let _ = write!(out, "{}", v.nmse);
            }
            out.push('\n');
        }
        out
    }

    /// `step,epoch,val_nmse,kinetic_energy`.
    pub fn validation_csv(&self) -> String {
        let mut out = String::from("step,epoch,val_nmse,kinetic_energy\n");
        for v in &self.validations {
            let _ = writeln!(out, "{},{},{},{}", v.step, v.epoch, v.nmse, v.kinetic_energy);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub step: usize,
    pub mean_loss: f64,
    pub val_nmse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<S> {
    pub state: ModelState<S>,
    pub log: TrainLog,
}

/// Independent RNG stream `k` under the run seed.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

const STREAM_ORDER: u64 = 1;
const STREAM_TIME: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;
const STREAM_DIAGNOSTIC: u64 = 5;

/// Mean NMSE of one-step guided samples (`w = 1.5`) from the EMA weights.
pub fn validation_nmse<S: Scalar>(state: &ModelState<S>, data: &Dataset, seed: u64) -> Result<f64> {
    let cfg = SampleConfig { steps: 1, guidance: 1.5, use_ema: true, seed };
    let mut total = 0.0;
    for s in &data.samples {
        let out = sample_model(state, &s.condition.cast::<S>(), &cfg)?;
        total += nmse(&out.clamped.cast::<f64>(), &s.target)?;
    }
    Ok(total / data.len() as f64)
}

fn kinetic_diagnostic<S: Scalar>(state: &ModelState<S>, data: &Dataset, cfg: &TrainConfig) -> Result<f64> {
    let mut rng = stream(cfg.seed, STREAM_DIAGNOSTIC);
    let pairs: Vec<_> = data
        .samples
        .iter()
        .take(4)
        .map(|s| {
            let x1 = s.target.cast::<S>();
            (Tensor::randn(x1.shape().to_vec(), &mut rng), x1, s.condition.cast::<S>())
        })
        .collect();
    let e = kinetic_energy(&state.field(Weights::Ema), &pairs, cfg.kinetic_samples.max(1), &mut rng)?;
    Ok(e.as_f64())
}

/// Runs training without progress reporting.
pub fn train<S: Scalar>(
    data: &Dataset,
    val: Option<&Dataset>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome<S>> {
    train_with(data, val, model, cfg, checkpoint_path, &mut |_| {})
}

/// The full loop. `on_epoch` is called after every epoch.
pub fn train_with<S: Scalar>(
    data: &Dataset,
    val: Option<&Dataset>,
    model: &ModelConfig,
    cfg: &TrainConfig,
    checkpoint_path: Option<&Path>,
    on_epoch: &mut dyn FnMut(&EpochReport),
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Dataset("training set is empty".into()));
    }
    if data.cond_channels() != model.cond_channels {
        return Err(Error::Config(format!(
            "dataset has {} condition channels ({}), model expects {}",
            data.cond_channels(),
            data.manifest.mode.as_str(),
            model.cond_channels
        )));
    }
    model.check_spatial(data.manifest.height, data.manifest.width)?;

    let mut state = ModelState::<S>::init(model, cfg.seed, cfg.track_ema)?;
    let mut opt = AdamW::new(&state.params);
    let mut order_rng = stream(cfg.seed, STREAM_ORDER);
    let mut time_rng = stream(cfg.seed, STREAM_TIME);
    let mut noise_rng = stream(cfg.seed, STREAM_NOISE);
    let mut drop_rng = stream(cfg.seed, STREAM_DROPOUT);
    let total_steps = cfg.epochs * cfg.steps_per_epoch(data.len());
    let samples: Vec<(Tensor<S>, Tensor<S>)> =
        data.samples.iter().map(|s| (s.condition.cast::<S>(), s.target.cast::<S>())).collect();

    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_steps = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let (cond, x1) = &samples[i];
                let t = S::lit(time_rng.random::<f64>());
                let (cond, _) = cfg_dropout(cond, cfg.p_uncond, &mut drop_rng);
                batch.push(FlowSample::draw(x1.clone(), cond, t, &cfg.path, &mut noise_rng)?);
            }
            let stack = |f: fn(&FlowSample<S>) -> &Tensor<S>| Tensor::stack(&batch.iter().map(|s| f(s).clone()).collect::<Vec<_>>());
            let (xs, us, cs) = (stack(|s| &s.x_t)?, stack(|s| &s.u_t)?, stack(|s| &s.condition)?);
            let ts: Vec<S> = batch.iter().map(|s| s.t).collect();

            let mut g = Graph::new();
            let p = state.net().bind(&mut g, &state.params);
            let (xv, uv, cv) = (g.leaf(xs), g.leaf(us), g.leaf(cs));
            let v = state.net().forward(&mut g, &p, xv, &ts, cv)?;
            let loss_var = cfm_loss_graph(&mut g, v, uv)?;
            let loss = g.value(loss_var).data()[0].as_f64();
            step += 1;
            if !loss.is_finite() {
                return Err(Error::Training { step, reason: format!("loss became {loss}") });
            }
            let grads = g.backward(loss_var)?;
            let mut grads: Vec<Tensor<S>> = p.iter().map(|&var| grads.get(var)).collect();
            if let Some(c) = cfg.grad_clip {
                clip_global_norm(&mut grads, S::lit(c));
            }
            let lr = lr_schedule(step, cfg.lr, cfg.warmup_steps, total_steps);
            opt.step(&mut state.params, &grads, S::lit(lr), S::lit(cfg.weight_decay))
                .map_err(|e| Error::Training { step, reason: e.to_string() })?;
            if let Some(ema) = state.ema.as_mut() {
                ema_update(ema, &state.params, S::lit(cfg.ema_decay))?;
            }
            log.steps.push(StepRecord { step, epoch, loss, lr });
            epoch_loss += loss;
            epoch_steps += 1;
        }

        let last = epoch == cfg.epochs;
        let mut val_nmse = None;
        if let Some(v) = val {
            if cfg.val_interval > 0 && (epoch % cfg.val_interval == 0 || last) {
                let n = validation_nmse(&state, v, cfg.seed)?;
                let ke = kinetic_diagnostic(&state, data, cfg)?;
                log.validations.push(ValRecord { step, epoch, nmse: n, kinetic_energy: ke });
                val_nmse = Some(n);
            }
        }
        if let Some(path) = checkpoint_path {
            if last || (cfg.save_interval > 0 && epoch % cfg.save_interval == 0) {
                checkpoint::save(&state, path)?;
            }
        }
        on_epoch(&EpochReport { epoch, step, mean_loss: epoch_loss / epoch_steps as f64, val_nmse });
    }
    Ok(TrainOutcome { state, log })
}
