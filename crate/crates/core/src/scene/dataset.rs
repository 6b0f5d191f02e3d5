//! Sample files and per-split manifests.
//!
//! ```text
//! "RFLW" | version u16 | channels u16 | H u16 | W u16
//! condition f64×(channels·H·W) | target f64×(H·W)      (little-endian)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{generate_scene, normalize_map, pathloss_oracle, Mode, RadioMap, SceneGenParams};
use crate::error::{load_err, Error, Result};
use crate::numeric::Tensor;

pub const SAMPLE_MAGIC: &[u8; 4] = b"RFLW";
pub const SAMPLE_VERSION: u16 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Test,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Test => "test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub mode: Mode,
    #[serde(rename = "H")]
    pub height: usize,
    #[serde(rename = "W")]
    pub width: usize,
    /// Normalization thresholds from the training split. Absent for data
    /// that arrives already normalized.
    pub lo_db: Option<f64>,
    pub hi_db: Option<f64>,
    pub seeds: Vec<u64>,
    pub gen_params: Option<SceneGenParams>,
    pub split: SplitKind,
    /// Sample file names, in dataset order.
    pub files: Vec<String>,
}

/// One conditioning tensor `[1, C, H, W]` and its target map `[1, 1, H, W]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub condition: Tensor<f64>,
    pub target: Tensor<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn cond_channels(&self) -> usize {
        self.manifest.mode.cond_channels()
    }

    /// Per-pixel mean of the target maps, `[1, 1, H, W]`.
    pub fn mean_target(&self) -> Result<Tensor<f64>> {
        let first = self.samples.first().ok_or_else(|| Error::Dataset("empty dataset".into()))?;
        let mut acc = Tensor::zeros(first.target.shape().to_vec());
        for s in &self.samples {
            acc = acc.add(&s.target)?;
        }
        Ok(acc.scale(1.0 / self.samples.len() as f64))
    }

    /// Stacked `(conditions, targets)` for the given sample indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor<f64>, Tensor<f64>)> {
        let pick = |f: fn(&Sample) -> &Tensor<f64>| -> Result<Tensor<f64>> {
            let items = indices
                .iter()
                .map(|&i| {
                    self.samples
                        .get(i)
                        .map(|s| f(s).clone())
                        .ok_or_else(|| Error::Dataset(format!("sample index {i} out of range {}", self.len())))
                })
                .collect::<Result<Vec<_>>>()?;
            Tensor::stack(&items)
        };
        Ok((pick(|s| &s.condition)?, pick(|s| &s.target)?))
    }
}

/// Per-scene seed: splitmix64 of `(seed << 32) + index`. A bijection, so
/// distinct indices never share a seed.
pub fn scene_seed(seed: u64, index: usize) -> u64 {
    let mut z = (seed << 32).wrapping_add(index as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_file_name(i: usize) -> String {
    format!("sample_{i:05}.rflw")
}

/// Generates `n_train + n_test` scenes; the training split comes first in
/// seed order. Scenes for a given `seed` are the same in both modes except
/// for the vehicle layer.
pub fn build_dataset(
    params: &SceneGenParams,
    n_train: usize,
    n_test: usize,
    mode: Mode,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::Config("both splits need at least one sample".into()));
    }
    params.validate()?;
    let seeds: Vec<u64> = (0..n_train + n_test).map(|i| scene_seed(seed, i)).collect();
    let mut conds = Vec::with_capacity(seeds.len());
    let mut raws: Vec<RadioMap> = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        let mut scene = generate_scene(params, s)?;
        if mode == Mode::Srm {
            scene = scene.without_vehicles();
        }
        conds.push(scene.condition_channels(mode)?);
        raws.push(pathloss_oracle(&scene, &params.pathloss));
    }
    let lo = raws[..n_train].iter().map(RadioMap::min).fold(f64::INFINITY, f64::min);
    let hi = raws[..n_train].iter().map(RadioMap::max).fold(f64::NEG_INFINITY, f64::max);
    let (h, w) = (params.size, params.size);
    let c = mode.cond_channels();
    let mut samples = Vec::with_capacity(seeds.len());
    for (cond, raw) in conds.into_iter().zip(&raws) {
        let norm = normalize_map(raw, lo, hi)?;
        samples.push(Sample {
            condition: Tensor::new(vec![1, c, h, w], cond)?,
            target: Tensor::new(vec![1, 1, h, w], norm.values)?,
        });
    }
    let test_samples = samples.split_off(n_train);
    let split = |kind: SplitKind, seeds: &[u64], samples: Vec<Sample>| Dataset {
        manifest: Manifest {
            mode,
            height: h,
            width: w,
            lo_db: Some(lo),
            hi_db: Some(hi),
            seeds: seeds.to_vec(),
            gen_params: Some(params.clone()),
            split: kind,
            files: (0..samples.len()).map(sample_file_name).collect(),
        },
        samples,
    };
    Ok((
        split(SplitKind::Train, &seeds[..n_train], samples),
        split(SplitKind::Test, &seeds[n_train..], test_samples),
    ))
}

fn u16_of(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Dataset(format!("{what} = {v} exceeds the u16 sample header")))
}

pub fn encode_sample(sample: &Sample) -> Result<Vec<u8>> {
    let (_, c, h, w) = sample.condition.dims4()?;
    if sample.target.shape() != [1, 1, h, w] {
        return Err(Error::Dataset(format!(
            "target shape {:?} does not match condition {:?}",
            sample.target.shape(),
            sample.condition.shape()
        )));
    }
    let mut buf = Vec::with_capacity(12 + 8 * (c + 1) * h * w);
    buf.extend_from_slice(SAMPLE_MAGIC);
    buf.extend_from_slice(&SAMPLE_VERSION.to_le_bytes());
    for (v, what) in [(c, "channels"), (h, "H"), (w, "W")] {
        buf.extend_from_slice(&u16_of(v, what)?.to_le_bytes());
    }
    for v in sample.condition.data().iter().chain(sample.target.data()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_sample(bytes: &[u8]) -> Result<Sample> {
    let bad = |m: &str| Error::Dataset(format!("malformed sample file: {m}"));
    if bytes.len() < 12 || &bytes[..4] != SAMPLE_MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    if word(4) != SAMPLE_VERSION as usize {
        return Err(bad(&format!("unsupported version {}", word(4))));
    }
    let (c, h, w) = (word(6), word(8), word(10));
    let n_cond = c * h * w;
    if bytes.len() != 12 + 8 * (n_cond + h * w) {
        return Err(bad(&format!("expected {} bytes, found {}", 12 + 8 * (n_cond + h * w), bytes.len())));
    }
    let vals: Vec<f64> = bytes[12..].chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
    let (cond, target) = vals.split_at(n_cond);
    Ok(Sample { condition: Tensor::new(vec![1, c, h, w], cond.to_vec())?, target: Tensor::new(vec![1, 1, h, w], target.to_vec())? })
}

/// Writes the manifest and one sample file per entry into `dir`.
pub fn write_split(dir: &Path, data: &Dataset) -> Result<()> {
    if data.manifest.files.len() != data.samples.len() {
        return Err(Error::Dataset("manifest file list does not match sample count".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::Dataset(format!("cannot create {}: {e}", dir.display())))?;
    for (name, s) in data.manifest.files.iter().zip(&data.samples) {
        let path = dir.join(name);
        fs::write(&path, encode_sample(s)?).map_err(|e| Error::Dataset(format!("cannot write {}: {e}", path.display())))?;
    }
    let json = serde_json::to_string_pretty(&data.manifest)?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, json).map_err(|e| Error::Dataset(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// `<root>/train` and `<root>/test`.
pub fn write_dataset(root: &Path, train: &Dataset, test: &Dataset) -> Result<()> {
    write_split(&root.join(SplitKind::Train.as_str()), train)?;
    write_split(&root.join(SplitKind::Test.as_str()), test)
}

pub fn read_split(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| load_err(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| load_err(&manifest_path, e))?;
    let c = manifest.mode.cond_channels();
    let mut samples = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| load_err(&path, e))?;
        let s = decode_sample(&bytes).map_err(|e| load_err(&path, e))?;
        if s.condition.shape() != [1, c, manifest.height, manifest.width] {
            return Err(load_err(
                &path,
                format!("shape {:?} disagrees with manifest ({c}, {}, {})", s.condition.shape(), manifest.height, manifest.width),
            ));
        }
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(Error::Dataset(format!("{} lists no samples", manifest_path.display())));
    }
    Ok(Dataset { manifest, samples })
}
