//! Reader for the published RadioMapSeer directory layout:
//!
//! ```text
//! <root>/png/buildings_complete/<map>.png
//! <root>/png/cars/<map>.png                  (dynamic mode)
//! <root>/antenna/<map>.json                  [[x, y], ...] per transmitter
//! <root>/gain/DPM/<map>_<tx>.png
//! <root>/gain/carsDPM/<map>_<tx>.png         (dynamic mode)
//! ```
//!
//! Antenna coordinates are `x` = column, `y` = row.

use std::fs;
use std::path::Path;

use super::dataset::{Dataset, Manifest, Sample, SplitKind};
use super::Mode;
use crate::error::{load_err, Result};
use crate::numeric::Tensor;
use crate::render::read_gray8;

fn antenna_positions(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| load_err(path, e))?;
    let raw: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| load_err(path, e))?;
    raw.into_iter()
        .map(|p| match p.as_slice() {
            [x, y] => Ok((*x, *y)),
            _ => Err(load_err(path, "each transmitter entry must be [x, y]")),
        })
        .collect()
}

fn read_sized(path: &Path, shape: Option<(usize, usize)>) -> Result<(usize, usize, Vec<f64>)> {
    let (h, w, v) = read_gray8(path)?;
    if let Some(expected) = shape {
        if (h, w) != expected {
            return Err(load_err(path, format!("image is {h}x{w}, expected {}x{}", expected.0, expected.1)));
        }
    }
    Ok((h, w, v))
}

/// Loads the given maps and transmitter indices in `(map, tx)` order.
/// Gain images are already normalized, so the manifest carries no dB range.
pub fn load_radiomapseer(
    root: &Path,
    mode: Mode,
    maps: &[usize],
    transmitters: &[usize],
    split: SplitKind,
) -> Result<Dataset> {
    let gain_dir = if mode == Mode::Drm { "carsDPM" } else { "DPM" };
    let mut shape = None;
    let mut samples = Vec::new();
    for &m in maps {
        let (h, w, buildings) = read_sized(&root.join("png/buildings_complete").join(format!("{m}.png")), shape)?;
        shape = Some((h, w));
        let cars = match mode {
            Mode::Drm => Some(read_sized(&root.join("png/cars").join(format!("{m}.png")), shape)?.2),
            Mode::Srm => None,
        };
        let antenna_path = root.join("antenna").join(format!("{m}.json"));
        let antennas = antenna_positions(&antenna_path)?;
        for &tx in transmitters {
            let &(x, y) = antennas
                .get(tx)
                .ok_or_else(|| load_err(&antenna_path, format!("no transmitter {tx} ({} listed)", antennas.len())))?;
            let (row, col) = (y.round(), x.round());
            if !(row >= 0.0 && col >= 0.0 && (row as usize) < h && (col as usize) < w) {
                return Err(load_err(&antenna_path, format!("transmitter {tx} at ({x}, {y}) is outside the map")));
            }
            let gain = read_sized(&root.join("gain").join(gain_dir).join(format!("{m}_{tx}.png")), shape)?.2;
            let mut cond = buildings.clone();
            let mut mask = vec![0.0; h * w];
            mask[row as usize * w + col as usize] = 1.0;
            cond.extend(mask);
            if let Some(c) = &cars {
                cond.extend_from_slice(c);
            }
            samples.push(Sample {
                condition: Tensor::new(vec![1, mode.cond_channels(), h, w], cond)?,
                target: Tensor::new(vec![1, 1, h, w], gain)?,
            });
        }
    }
    let (height, width) = shape.unwrap_or((0, 0));
    let files = (0..samples.len()).map(|i| format!("sample_{i:05}.rflw")).collect();
    Ok(Dataset {
        manifest: Manifest {
            mode,
            height,
            width,
            lo_db: None,
            hi_db: None,
            seeds: Vec::new(),
            gen_params: None,
            split,
            files,
        },
        samples,
    })
}
