use std::fs;
use std::path::{Path, PathBuf};

use rmflow_core::ablation::{cfg_sweep, modules_sweep, steps_sweep, sweep_csv};
use rmflow_core::metrics::{evaluate_predictions, mean_predictor_baseline};
use rmflow_core::model::{checkpoint, Variant};
use rmflow_core::render::{comparison_grid, line_plot, write_gray8, GridRow};
use rmflow_core::sample::batch_sample;
use rmflow_core::scene::{build_dataset, encode_sample, read_split, write_dataset, Dataset, Mode, Sample};
use rmflow_core::train::train_with;
use rmflow_core::{Error, ModelState64};
use serde_json::json;

use crate::config::{RunConfig, RunManifest};
use crate::{Common, ModeArg, SampleFlags, SweepArg, TrainFlags, VariantArg};

pub enum CliError {
    Core(Error),
    Refused(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Refused(_) => "refused",
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::Refused(m) => m.clone(),
        }
    }
}

impl<E: Into<Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Core(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::Srm => Mode::Srm,
        ModeArg::Drm => Mode::Drm,
    }
}

fn base_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, f: &TrainFlags) {
    if let Some(v) = f.variant {
        cfg.variant = match v {
            VariantArg::Lite => Variant::Lite,
            VariantArg::Full => Variant::Full,
        };
    }
    if let Some(t) = f.sa {
        cfg.spatial_attention = t.on();
    }
    if let Some(t) = f.ema {
        cfg.ema = t.on();
        cfg.sample.use_ema = t.on();
    }
    let t = &mut cfg.train;
    t.epochs = f.epochs.unwrap_or(t.epochs);
    t.batch_size = f.batch_size.unwrap_or(t.batch_size);
    t.lr = f.lr.unwrap_or(t.lr);
    t.warmup_steps = f.warmup.unwrap_or(t.warmup_steps);
    t.ema_decay = f.ema_decay.unwrap_or(t.ema_decay);
    t.p_uncond = f.p_uncond.unwrap_or(t.p_uncond);
}

fn apply_sample_flags(cfg: &mut RunConfig, f: &SampleFlags) {
    let s = &mut cfg.sample;
    s.steps = f.steps.unwrap_or(s.steps);
    s.guidance = f.guidance.unwrap_or(s.guidance);
    if let Some(t) = f.sample_ema {
        s.use_ema = t.on();
    }
}

/// Creates `out`, refusing a non-empty directory unless `force` is set.
fn prepare_out(common: &Common) -> CliResult<()> {
    let out = &common.out;
    if out.exists() {
        if !out.is_dir() {
            return Err(CliError::Refused(format!("{} exists and is not a directory", out.display())));
        }
        let non_empty = fs::read_dir(out)?.next().is_some();
        if non_empty && !common.force {
            return Err(CliError::Refused(format!(
                "output directory {} is not empty; pass --force to overwrite",
                out.display()
            )));
        }
    }
    fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(
    common: &Common,
    command: &str,
    config: &RunConfig,
    data: Option<&Path>,
    checkpoint: Option<&Path>,
    extra: serde_json::Value,
) -> CliResult<()> {
    let m = RunManifest {
        command: command.into(),
        config: config.clone(),
        data: data.map(PathBuf::from),
        checkpoint: checkpoint.map(PathBuf::from),
        out: common.out.clone(),
        extra,
    };
    fs::write(common.out.join("run.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

fn load_checkpoint(path: &Path) -> CliResult<ModelState64> {
    Ok(checkpoint::load::<f64>(path)?)
}

fn check_checkpoint_matches(state: &ModelState64, data: &Dataset) -> CliResult<()> {
    if state.config.cond_channels != data.cond_channels() {
        return Err(Error::Config(format!(
            "checkpoint expects {} condition channels, dataset has {} ({})",
            state.config.cond_channels,
            data.cond_channels(),
            data.manifest.mode.as_str()
        ))
        .into());
    }
    state.config.check_spatial(data.manifest.height, data.manifest.width)?;
    Ok(())
}

pub fn gen_data(
    common: &Common,
    mode: Option<ModeArg>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    size: Option<usize>,
) -> CliResult<()> {
    let mut cfg = base_config(common)?;
    if let Some(m) = mode {
        cfg.mode = Some(mode_of(m));
    }
    cfg.n_train = n_train.unwrap_or(cfg.n_train);
    cfg.n_test = n_test.unwrap_or(cfg.n_test);
    cfg.scene.size = size.unwrap_or(cfg.scene.size);
    let mode = *cfg.mode.get_or_insert(Mode::Srm);
    cfg.resolve_seeds();
    prepare_out(common)?;
    let (train, test) = build_dataset(&cfg.scene, cfg.n_train, cfg.n_test, mode, cfg.seed)?;
    for split in ["train", "test"] {
        let dir = common.out.join(split);
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
    }
    write_dataset(&common.out, &train, &test)?;
    write_manifest(common, "gen-data", &cfg, None, None, json!({ "lo_db": train.manifest.lo_db, "hi_db": train.manifest.hi_db }))?;
    println!(
        "wrote {} train and {} test {} scenes to {}",
        train.len(),
        test.len(),
        mode.as_str(),
        common.out.display()
    );
    Ok(())
}

pub fn train(common: &Common, data: &Path, mode: Option<ModeArg>, flags: &TrainFlags) -> CliResult<()> {
    let mut cfg = base_config(common)?;
    if let Some(m) = mode {
        cfg.mode = Some(mode_of(m));
    }
    apply_train_flags(&mut cfg, flags);
    cfg.resolve_seeds();
    let train_set = read_split(&data.join("train"))?;
    let data_mode = train_set.manifest.mode;
    if let Some(m) = cfg.mode {
        if m != data_mode {
            return Err(Error::Config(format!(
                "config mode {} does not match dataset mode {}",
                m.as_str(),
                data_mode.as_str()
            ))
            .into());
        }
    }
    cfg.mode = Some(data_mode);
    let test_dir = data.join("test");
    let val = if test_dir.join("manifest.json").exists() { Some(read_split(&test_dir)?) } else { None };
    let model = cfg.model_config(data_mode);
    model.check_spatial(train_set.manifest.height, train_set.manifest.width)?;
    cfg.train.validate()?;
    prepare_out(common)?;
    let ckpt = common.out.join("checkpoint.rfck");
    let out = train_with::<f64>(&train_set, val.as_ref(), &model, &cfg.train, Some(&ckpt), &mut |r| match r.val_nmse {
        Some(v) => println!("epoch {} step {} loss {:.6} val_nmse {:.6}", r.epoch, r.step, r.mean_loss, v),
        None => println!("epoch {} step {} loss {:.6}", r.epoch, r.step, r.mean_loss),
    })?;
    checkpoint::save(&out.state, &ckpt)?;
    fs::write(common.out.join("train_log.csv"), out.log.to_csv())?;
    fs::write(common.out.join("validation.csv"), out.log.validation_csv())?;
    line_plot(&out.log.epoch_losses(), 480, 240).save(&common.out.join("loss.png"))?;
    write_manifest(
        common,
        "train",
        &cfg,
        Some(data),
        Some(&ckpt),
        json!({ "parameters": out.state.count_parameters(), "steps": out.log.steps.len() }),
    )?;
    println!("saved {}", ckpt.display());
    Ok(())
}

fn grid_rows<'a>(samples: &'a [Sample], preds: &'a [Vec<f64>], n: usize) -> Vec<GridRow<'a>> {
    samples
        .iter()
        .zip(preds)
        .take(n)
        .map(|(s, p)| GridRow { condition: s.condition.data(), prediction: p, truth: s.target.data() })
        .collect()
}

pub fn eval(common: &Common, ckpt: &Path, data: &Path, flags: &SampleFlags) -> CliResult<()> {
    let mut cfg = base_config(common)?;
    apply_sample_flags(&mut cfg, flags);
    cfg.resolve_seeds();
    cfg.sample.validate()?;
    let state = load_checkpoint(ckpt)?;
    let test = read_split(&data.join("test"))?;
    check_checkpoint_matches(&state, &test)?;
    prepare_out(common)?;
    let conds: Vec<_> = test.samples.iter().map(|s| s.condition.clone()).collect();
    let batch = batch_sample(&state, &conds, &cfg.sample)?;
    let preds: Vec<_> = batch.outputs.iter().map(|o| o.clamped.clone()).collect();
    let mut report = evaluate_predictions(&test, &preds)?;
    report.latency = Some(batch.latency.clone());
    fs::write(common.out.join("eval.csv"), report.to_csv())?;
    let train_dir = data.join("train");
    let baseline = if train_dir.join("manifest.json").exists() {
        let b = mean_predictor_baseline(&read_split(&train_dir)?, &test)?;
        fs::write(common.out.join("baseline.csv"), b.to_csv())?;
        Some(b.aggregate.nmse)
    } else {
        None
    };
    let flat: Vec<Vec<f64>> = preds.iter().map(|p| p.data().to_vec()).collect();
    let (h, w) = (test.manifest.height, test.manifest.width);
    comparison_grid(&grid_rows(&test.samples, &flat, 4), h, w, 4)?.save(&common.out.join("grid.png"))?;
    let a = &report.aggregate;
    write_manifest(
        common,
        "eval",
        &cfg,
        Some(data),
        Some(ckpt),
        json!({ "nmse": a.nmse, "psnr_db": a.psnr_db, "rmse": a.rmse, "ssim": a.ssim,
                "baseline_nmse": baseline, "latency": batch.latency }),
    )?;
    println!("nmse {:.6} psnr {:.3} rmse {:.6} ssim {:.4}", a.nmse, a.psnr_db, a.rmse, a.ssim);
    if let Some(b) = baseline {
        println!("mean-predictor baseline nmse {b:.6}");
    }
    Ok(())
}

pub fn sample(common: &Common, ckpt: &Path, data: &Path, n: Option<usize>, flags: &SampleFlags) -> CliResult<()> {
    let mut cfg = base_config(common)?;
    apply_sample_flags(&mut cfg, flags);
    cfg.n_samples = n.unwrap_or(cfg.n_samples);
    cfg.resolve_seeds();
    cfg.sample.validate()?;
    let state = load_checkpoint(ckpt)?;
    let test = read_split(&data.join("test"))?;
    check_checkpoint_matches(&state, &test)?;
    if cfg.n_samples == 0 {
        return Err(Error::Config("n must be at least 1".into()).into());
    }
    prepare_out(common)?;
    let scenes: Vec<&Sample> = test.samples.iter().cycle().take(cfg.n_samples).collect();
    let conds: Vec<_> = scenes.iter().map(|s| s.condition.clone()).collect();
    let batch = batch_sample(&state, &conds, &cfg.sample)?;
    let maps = common.out.join("maps");
    if maps.exists() {
        fs::remove_dir_all(&maps)?;
    }
    fs::create_dir_all(&maps)?;
    let (h, w) = (test.manifest.height, test.manifest.width);
    for (i, (s, o)) in scenes.iter().zip(&batch.outputs).enumerate() {
        let out = Sample { condition: s.condition.clone(), target: o.clamped.clone() };
        fs::write(maps.join(format!("map_{i:05}.rflw")), encode_sample(&out)?)?;
        write_gray8(&maps.join(format!("map_{i:05}.png")), h, w, o.clamped.data())?;
    }
    let lat = &batch.latency;
    fs::write(common.out.join("latency.json"), serde_json::to_string_pretty(lat)?)?;
    write_manifest(common, "sample", &cfg, Some(data), Some(ckpt), json!({ "latency": lat }))?;
    println!("sampled {} maps: latency {:.6} ± {:.6} s", lat.count, lat.mean_s, lat.std_s);
    Ok(())
}

pub fn ablate(
    common: &Common,
    sweep: SweepArg,
    ckpt: Option<&Path>,
    data: &Path,
    train_flags: &TrainFlags,
    sample_flags: &SampleFlags,
) -> CliResult<()> {
    let mut cfg = base_config(common)?;
    apply_train_flags(&mut cfg, train_flags);
    apply_sample_flags(&mut cfg, sample_flags);
    cfg.resolve_seeds();
    cfg.sample.validate()?;
    let test = read_split(&data.join("test"))?;
    let (name, csv) = match sweep {
        SweepArg::Cfg | SweepArg::Steps => {
            let path = ckpt.ok_or_else(|| Error::Config("the cfg and steps sweeps need --checkpoint".into()))?;
            let state = load_checkpoint(path)?;
            check_checkpoint_matches(&state, &test)?;
            prepare_out(common)?;
            if matches!(sweep, SweepArg::Cfg) {
                ("cfg_sweep.csv", sweep_csv("w", &cfg_sweep(&state, &test, &cfg.sample)?))
            } else {
                ("steps_sweep.csv", sweep_csv("steps", &steps_sweep(&state, &test, &cfg.sample)?))
            }
        }
        SweepArg::Modules => {
            let train_set = read_split(&data.join("train"))?;
            let mode = train_set.manifest.mode;
            let model = cfg.model_config(mode);
            model.check_spatial(train_set.manifest.height, train_set.manifest.width)?;
            cfg.train.validate()?;
            cfg.mode = Some(mode);
            prepare_out(common)?;
            ("modules_sweep.csv", sweep_csv("arm", &modules_sweep(&train_set, &test, &model, &cfg.train, &cfg.sample)?))
        }
    };
    fs::write(common.out.join(name), &csv)?;
    write_manifest(common, "ablate", &cfg, Some(data), ckpt, json!({ "table": name }))?;
    print!("{csv}");
    Ok(())
}
