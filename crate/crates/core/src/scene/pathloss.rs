use serde::{Deserialize, Serialize};

use super::{raycast_wall_crossings, RadioMap, RadioScene};
use crate::error::{Error, Result};

/// Log-distance law plus a fixed loss per obstructing cell:
/// `PL = PL0 + 10·n·log10(d) + Lw·walls + Lv·vehicles`, clamped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossModel {
    pub pl0_db: f64,
    pub exponent: f64,
    pub wall_db: f64,
    pub vehicle_db: f64,
    pub clamp_lo_db: f64,
    pub clamp_hi_db: f64,
}

impl Default for PathlossModel {
    fn default() -> Self {
        Self { pl0_db: 40.0, exponent: 2.5, wall_db: 12.0, vehicle_db: 4.0, clamp_lo_db: 40.0, clamp_hi_db: 140.0 }
    }
}

impl PathlossModel {
    pub fn validate(&self) -> Result<()> {
        let all = [self.pl0_db, self.exponent, self.wall_db, self.vehicle_db, self.clamp_lo_db, self.clamp_hi_db];
        if all.iter().any(|v| !v.is_finite()) || self.clamp_lo_db >= self.clamp_hi_db {
            return Err(Error::Config("pathloss constants must be finite with clamp_lo < clamp_hi".into()));
        }
        if self.exponent < 0.0 || self.wall_db < 0.0 || self.vehicle_db < 0.0 {
            return Err(Error::Config("pathloss exponent and per-crossing losses must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Unclamped loss for a given distance in meters and crossing counts.
    pub fn loss_db(&self, distance_m: f64, walls: usize, vehicles: usize) -> f64 {
        self.pl0_db
            + 10.0 * self.exponent * distance_m.log10()
            + self.wall_db * walls as f64
            + self.vehicle_db * vehicles as f64
    }
}

/// Raw dB map. Building cells get the clamp maximum.
pub fn pathloss_oracle(scene: &RadioScene, model: &PathlossModel) -> RadioMap {
    let (h, w) = (scene.height(), scene.width());
    let (tr, tc) = scene.tx;
    let mut values = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            if scene.buildings.get(r, c) {
                values.push(model.clamp_hi_db);
                continue;
            }
            let dr = r as f64 - tr as f64;
            let dc = c as f64 - tc as f64;
            let d = (dr * dr + dc * dc).sqrt().max(1.0) * scene.resolution_m;
            let x = raycast_wall_crossings(scene, scene.tx, (r, c));
            values.push(model.loss_db(d, x.buildings, x.vehicles).clamp(model.clamp_lo_db, model.clamp_hi_db));
        }
    }
    RadioMap { height: h, width: w, values }
}

/// `clamp((hi − raw)/(hi − lo), 0, 1)`: 1 is the strongest signal.
pub fn normalize_map(raw: &RadioMap, lo: f64, hi: f64) -> Result<RadioMap> {
    if !(lo < hi) {
        return Err(Error::Config(format!("normalization needs lo < hi, got lo={lo}, hi={hi}")));
    }
    let span = hi - lo;
    Ok(RadioMap {
        height: raw.height,
        width: raw.width,
        values: raw.values.iter().map(|&v| ((hi - v) / span).clamp(0.0, 1.0)).collect(),
    })
}
