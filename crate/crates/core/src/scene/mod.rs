//! Synthetic urban scenes, their ground-truth pathloss maps, and the
//! on-disk dataset format.

mod dataset;
mod pathloss;
mod radiomapseer;
mod raycast;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dataset::{
    build_dataset, decode_sample, encode_sample, read_split, scene_seed, write_dataset, write_split, Dataset, Manifest,
    Sample, SplitKind,
};
pub use pathloss::{normalize_map, pathloss_oracle, PathlossModel};
pub use radiomapseer::load_radiomapseer;
pub use raycast::{raycast_wall_crossings, Crossings};

use crate::error::{Error, Result};

/// Static (buildings + transmitter) or dynamic (adds a vehicle layer) task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Srm,
    Drm,
}

impl Mode {
    pub fn cond_channels(self) -> usize {
        match self {
            Mode::Srm => 2,
            Mode::Drm => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Srm => "srm",
            Mode::Drm => "drm",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srm" => Ok(Mode::Srm),
            "drm" => Ok(Mode::Drm),
            other => Err(Error::Config(format!("unknown mode {other:?} (expected srm or drm)"))),
        }
    }
}

/// Row-major binary occupancy grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Occupancy {
    pub height: usize,
    pub width: usize,
    cells: Vec<bool>,
}

impl Occupancy {
    pub fn empty(height: usize, width: usize) -> Self {
        Self { height, width, cells: vec![false; height * width] }
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.cells[r * self.width + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.cells[r * self.width + c] = v;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.cells.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// The conditioning input: buildings, one transmitter, optional vehicles.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioScene {
    pub buildings: Occupancy,
    /// `(row, col)` of the single transmitter cell.
    pub tx: (usize, usize),
    pub vehicles: Option<Occupancy>,
    pub resolution_m: f64,
}

impl RadioScene {
    pub fn height(&self) -> usize {
        self.buildings.height
    }

    pub fn width(&self) -> usize {
        self.buildings.width
    }

    pub fn tx_mask(&self) -> Occupancy {
        let mut m = Occupancy::empty(self.height(), self.width());
        m.set(self.tx.0, self.tx.1, true);
        m
    }

    /// The same scene with the vehicle layer removed.
    pub fn without_vehicles(&self) -> Self {
        Self { vehicles: None, ..self.clone() }
    }

    /// Checks the structural invariants: one free transmitter cell and
    /// vehicles only on free cells.
    pub fn validate(&self) -> Result<()> {
        let (h, w) = (self.height(), self.width());
        if self.tx.0 >= h || self.tx.1 >= w {
            return Err(Error::Contract(format!("transmitter {:?} outside {h}x{w} grid", self.tx)));
        }
        if self.buildings.get(self.tx.0, self.tx.1) {
            return Err(Error::Contract("transmitter inside a building".into()));
        }
        if let Some(v) = &self.vehicles {
            if (v.height, v.width) != (h, w) {
                return Err(Error::Contract("vehicle grid size differs from building grid".into()));
            }
            if v.get(self.tx.0, self.tx.1) {
                return Err(Error::Contract("vehicle on the transmitter cell".into()));
            }
            if (0..h).any(|r| (0..w).any(|c| v.get(r, c) && self.buildings.get(r, c))) {
                return Err(Error::Contract("vehicle inside a building".into()));
            }
        }
        Ok(())
    }

    /// Condition channels `[buildings, tx mask, (vehicles)]` as `[C·H·W]`.
    pub fn condition_channels(&self, mode: Mode) -> Result<Vec<f64>> {
        let mut out = self.buildings.to_f64();
        out.extend(self.tx_mask().to_f64());
        if mode == Mode::Drm {
            let v = self
                .vehicles
                .as_ref()
                .ok_or_else(|| Error::Config("dynamic mode requires a vehicle layer".into()))?;
            out.extend(v.to_f64());
        }
        Ok(out)
    }
}

/// A grid of values: raw pathloss in dB, or normalized signal in `[0,1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadioMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl RadioMap {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGenParams {
    /// Grid side length (`H = W`).
    pub size: usize,
    pub n_buildings: usize,
    /// Inclusive range of rectangle side lengths, in cells.
    pub building_min: usize,
    pub building_max: usize,
    /// Inclusive range of the number of vehicle cells.
    pub vehicles_min: usize,
    pub vehicles_max: usize,
    pub resolution_m: f64,
    pub pathloss: PathlossModel,
}

impl Default for SceneGenParams {
    fn default() -> Self {
        Self {
            size: 32,
            n_buildings: 6,
            building_min: 4,
            building_max: 8,
            vehicles_min: 4,
            vehicles_max: 12,
            resolution_m: 1.0,
            pathloss: PathlossModel::default(),
        }
    }
}

impl SceneGenParams {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 {
            return Err(Error::Config(format!("grid size must be at least 16, got {}", self.size)));
        }
        if self.n_buildings > 0 && (self.building_min == 0 || self.building_min > self.building_max) {
            return Err(Error::Config("building size range must satisfy 1 ≤ min ≤ max".into()));
        }
        if self.n_buildings > 0 && self.building_max > self.size {
            return Err(Error::Config(format!(
                "buildings of side {} do not fit a {} grid",
                self.building_max, self.size
            )));
        }
        if self.vehicles_min > self.vehicles_max {
            return Err(Error::Config("vehicle count range must satisfy min ≤ max".into()));
        }
        if !(self.resolution_m > 0.0 && self.resolution_m.is_finite()) {
            return Err(Error::Config("resolution must be positive".into()));
        }
        self.pathloss.validate()
    }
}

/// Axis-aligned rectangle `[r0, r0+h) × [c0, c0+w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Rect {
    pub r0: usize,
    pub c0: usize,
    pub h: usize,
    pub w: usize,
}

pub(crate) fn place_buildings<R: Rng + ?Sized>(params: &SceneGenParams, rng: &mut R) -> Vec<Rect> {
    let n = params.size;
    (0..params.n_buildings)
        .map(|_| {
            let h = rng.random_range(params.building_min..=params.building_max);
            let w = rng.random_range(params.building_min..=params.building_max);
            let r0 = rng.random_range(0..=n - h);
            let c0 = rng.random_range(0..=n - w);
            Rect { r0, c0, h, w }
        })
        .collect()
}

/// Buildings first, then the transmitter uniformly among free cells, then
/// vehicles on the remaining free cells. Pure function of `(params, seed)`.
pub fn generate_scene(params: &SceneGenParams, seed: u64) -> Result<RadioScene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.size;
    let mut buildings = Occupancy::empty(n, n);
    for rect in place_buildings(params, &mut rng) {
        for r in rect.r0..rect.r0 + rect.h {
            for c in rect.c0..rect.c0 + rect.w {
                buildings.set(r, c, true);
            }
        }
    }
    let free: Vec<(usize, usize)> =
        (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).filter(|&(r, c)| !buildings.get(r, c)).collect();
    if free.is_empty() {
        return Err(Error::Generation("no free cell left for the transmitter".into()));
    }
    let tx = free[rng.random_range(0..free.len())];

    let road: Vec<(usize, usize)> = free.into_iter().filter(|&p| p != tx).collect();
    let want = rng.random_range(params.vehicles_min..=params.vehicles_max).min(road.len());
    let mut vehicles = Occupancy::empty(n, n);
    for i in index::sample(&mut rng, road.len(), want) {
        let (r, c) = road[i];
        vehicles.set(r, c, true);
    }
    let scene = RadioScene { buildings, tx, vehicles: Some(vehicles), resolution_m: params.resolution_m };
    debug_assert!(scene.validate().is_ok());
    Ok(scene)
}
