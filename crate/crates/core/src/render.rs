//! 8-bit PNG input/output and a minimal rasterizer for result figures.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{load_err, Error, Result};

/// Decodes an 8-bit grayscale PNG to `(height, width, values in [0,1])`.
pub fn read_gray8(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let file = File::open(path).map_err(|e| load_err(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file)).read_info().map_err(|e| load_err(path, e))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(load_err(
            path,
            format!("expected 8-bit grayscale, found {:?} at {:?}", info.color_type, info.bit_depth),
        ));
    }
    let size = reader.output_buffer_size().ok_or_else(|| load_err(path, "image too large"))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(|e| load_err(path, e))?;
    let (w, h) = (frame.width as usize, frame.height as usize);
    let values = (0..h)
        .flat_map(|r| buf[r * frame.line_size..r * frame.line_size + w].iter().map(|&b| b as f64 / 255.0))
        .collect();
    Ok((h, w, values))
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn write_png(path: &Path, width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Result<()> {
    let w = u32::try_from(width).map_err(|_| Error::Config("image too wide".into()))?;
    let h = u32::try_from(height).map_err(|_| Error::Config("image too tall".into()))?;
    let file = File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w, h);
    enc.set_color(color);
    enc.set_depth(png::BitDepth::Eight);
    let io = |e: png::EncodingError| Error::Io(std::io::Error::other(e));
    let mut writer = enc.write_header().map_err(io)?;
    writer.write_image_data(data).map_err(io)?;
    writer.finish().map_err(io)
}

/// Writes values in `[0,1]` (clamped) as an 8-bit grayscale PNG.
pub fn write_gray8(path: &Path, height: usize, width: usize, values: &[f64]) -> Result<()> {
    if values.len() != height * width {
        return Err(Error::Config(format!("{} values for a {height}x{width} image", values.len())));
    }
    let bytes: Vec<u8> = values.iter().map(|&v| to_byte(v)).collect();
    write_png(path, width, height, png::ColorType::Grayscale, &bytes)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, fill: [u8; 3]) -> Self {
        Self { width, height, data: fill.repeat(width * height) }
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = 3 * (y * self.width + x);
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_png(path, self.width, self.height, png::ColorType::Rgb, &self.data)
    }

    /// Fills the `scale × scale` block of every cell of an `h × w` panel
    /// whose top-left pixel is `(x0, y0)`.
    fn blit(&mut self, x0: usize, y0: usize, h: usize, w: usize, scale: usize, color: impl Fn(usize) -> [u8; 3]) {
        for r in 0..h {
            for c in 0..w {
                let rgb = color(r * w + c);
                for dy in 0..scale {
                    for dx in 0..scale {
                        self.put(x0 + c * scale + dx, y0 + r * scale + dy, rgb);
                    }
                }
            }
        }
    }

    fn line(&mut self, (x0, y0): (i64, i64), (x1, y1): (i64, i64), rgb: [u8; 3]) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            if x >= 0 && y >= 0 {
                self.put(x as usize, y as usize, rgb);
            }
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
}

fn gray(v: f64) -> [u8; 3] {
    let b = to_byte(v);
    [b, b, b]
}

/// Black → red → yellow → white.
pub fn heat(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0) * 3.0;
    let ch = |x: f64| to_byte(x.clamp(0.0, 1.0));
    [ch(v), ch(v - 1.0), ch(v - 2.0)]
}

/// One row of a comparison figure. `condition` is `[C·H·W]`.
pub struct GridRow<'a> {
    pub condition: &'a [f64],
    pub prediction: &'a [f64],
    pub truth: &'a [f64],
}

/// Four panels per row: condition | prediction | ground truth | |error|.
/// The image is `4·W·scale` wide and `rows·H·scale` tall.
pub fn comparison_grid(rows: &[GridRow<'_>], height: usize, width: usize, scale: usize) -> Result<RgbImage> {
    let n = height * width;
    let scale = scale.max(1);
    let mut img = RgbImage::new(4 * width * scale, rows.len() * height * scale, [0, 0, 0]);
    for (i, row) in rows.iter().enumerate() {
        if row.prediction.len() != n || row.truth.len() != n || row.condition.is_empty() || row.condition.len() % n != 0 {
            return Err(Error::Config(format!("grid row {i} does not match a {height}x{width} panel")));
        }
        let channels = row.condition.len() / n;
        let y0 = i * height * scale;
        let panel = width * scale;
        img.blit(0, y0, height, width, scale, |k| {
            let at = |c: usize| c < channels && row.condition[c * n + k] > 0.5;
            if at(1) {
                [255, 40, 40]
            } else if at(2) {
                [60, 120, 255]
            } else if at(0) {
                [150, 150, 150]
            } else {
                [0, 0, 0]
            }
        });
        img.blit(panel, y0, height, width, scale, |k| gray(row.prediction[k]));
        img.blit(2 * panel, y0, height, width, scale, |k| gray(row.truth[k]));
        img.blit(3 * panel, y0, height, width, scale, |k| heat((row.prediction[k] - row.truth[k]).abs()));
    }
    Ok(img)
}

/// Polyline of `values` against their index, y-axis scaled to the data range.
pub fn line_plot(values: &[f64], width: usize, height: usize) -> RgbImage {
    let mut img = RgbImage::new(width, height, [255, 255, 255]);
    let margin = 8usize;
    if width <= 2 * margin || height <= 2 * margin {
        return img;
    }
    let (left, right) = (margin as i64, (width - margin) as i64);
    let (top, bottom) = (margin as i64, (height - margin) as i64);
    let axis = [0, 0, 0];
    img.line((left, bottom), (right, bottom), axis);
    img.line((left, top), (left, bottom), axis);
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return img;
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    let point = |i: usize, v: f64| {
        let x = left + ((right - left) as f64 * i as f64 / n as f64).round() as i64;
        let y = bottom - ((bottom - top) as f64 * (v - lo) / span).round() as i64;
        (x, y)
    };
    let mut prev = None;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            prev = None;
            continue;
        }
        let p = point(i, v);
        img.line(prev.unwrap_or(p), p, [30, 60, 200]);
        prev = Some(p);
    }
    img
}
