//! Shared domain types and the depth-to-proximity normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Agent pose on the floor plane. Heading is measured counter-clockwise from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose { x, y, heading }
    }
}

/// Rectangular grid of millimeter depths with a validity mask.
///
/// Invalid pixels always store depth 0. Pipeline stages read depths through
/// [`DepthFrame::get`], which never exposes the stored value of an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFrame {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) depth: Vec<u16>,
    pub(crate) valid: Vec<bool>,
    pub(crate) timestamp: f64,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, depth: Vec<u16>, valid: Vec<bool>, timestamp: f64) -> Result<Self> {
        let n = width.checked_mul(height).ok_or_else(|| Error::Dimension(format!("{width}x{height} overflows")))?;
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty frame {width}x{height}")));
        }
        if depth.len() != n || valid.len() != n {
            return Err(Error::Dimension(format!(
                "{width}x{height} frame needs {n} pixels, got depth {} / mask {}",
                depth.len(),
                valid.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| !valid[i] && depth[i] != 0) {
            return Err(Error::Precondition(format!("invalid pixel {i} carries depth {} (must be 0)", depth[i])));
        }
        Ok(DepthFrame { width, height, depth, valid, timestamp })
    }

    /// Builds a frame where depth 0 marks an invalid pixel, the on-disk convention.
    pub fn from_depths(width: usize, height: usize, depth: Vec<u16>, timestamp: f64) -> Result<Self> {
        let valid = depth.iter().map(|&d| d != 0).collect();
        Self::new(width, height, depth, valid, timestamp)
    }

    /// All-invalid frame.
    pub fn empty(width: usize, height: usize, timestamp: f64) -> Self {
        let n = width * height;
        DepthFrame { width, height, depth: vec![0; n], valid: vec![false; n], timestamp }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn with_timestamp(mut self, timestamp: f64) -> Self {
        self.timestamp = timestamp;
        self
    }

    /// Depth of pixel `i` (row-major), or `None` when the pixel is a hole.
    #[inline]
    pub fn get(&self, i: usize) -> Option<u16> {
        if self.valid[i] {
            Some(self.depth[i])
        } else {
            None
        }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> Option<u16> {
        self.get(y * self.width + x)
    }

    #[inline]
    pub fn is_valid(&self, i: usize) -> bool {
        self.valid[i]
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Raw row-major depths with 0 at every invalid pixel.
    pub fn raw_depths(&self) -> &[u16] {
        &self.depth
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub(crate) fn set(&mut self, i: usize, depth: u16) {
        self.depth[i] = depth;
        self.valid[i] = true;
    }

    pub(crate) fn invalidate(&mut self, i: usize) {
        self.depth[i] = 0;
        self.valid[i] = false;
    }

    pub fn same_shape(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }

    /// Checks that every valid pixel lies inside the sensor's range.
    pub fn check_range(&self, sensor: &SensorModel) -> Result<()> {
        match (0..self.len())
            .find_map(|i| self.get(i).filter(|&d| d < sensor.z_min || d > sensor.z_max).map(|d| (i, d)))
        {
            Some((i, d)) => {
                Err(Error::Precondition(format!("pixel {i} depth {d} outside [{}, {}]", sensor.z_min, sensor.z_max)))
            }
            None => Ok(()),
        }
    }

    #[cfg(test)]
    pub(crate) fn poisoned(&self, sentinel: u16) -> Self {
        let mut f = self.clone();
        for (d, &v) in f.depth.iter_mut().zip(&f.valid) {
            if !v {
                *d = sentinel;
            }
        }
        f
    }
}

pub type Rgb = [u8; 3];

/// Color image pixel-aligned with a depth frame; guides the hole filler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidanceFrame {
    width: usize,
    height: usize,
    rgb: Vec<Rgb>,
}

impl GuidanceFrame {
    pub fn new(width: usize, height: usize, rgb: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 || rgb.len() != width * height {
            return Err(Error::Dimension(format!("guidance {width}x{height} with {} pixels", rgb.len())));
        }
        Ok(GuidanceFrame { width, height, rgb })
    }

    pub fn uniform(width: usize, height: usize, color: Rgb) -> Self {
        GuidanceFrame { width, height, rgb: vec![color; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.rgb
    }

    #[inline]
    pub fn get(&self, i: usize) -> Rgb {
        self.rgb[i]
    }

    pub fn at(&self, x: usize, y: usize) -> Rgb {
        self.rgb[y * self.width + x]
    }
}

/// Pinhole depth sensor. Depths in millimeters, mounting height in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub z_min: u16,
    pub z_max: u16,
    pub noise_sigma_at_1m: f64,
    pub mounted_height: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            width: 320,
            height: 240,
            fx: 285.0,
            fy: 285.0,
            cx: 160.0,
            cy: 120.0,
            z_min: 800,
            // Covers the diagonal of the 6 m x 4 m trial room, so a dropout
            // always means "too close" or an artifact, never "too far".
            z_max: 7500,
            noise_sigma_at_1m: 1.5,
            mounted_height: 1.2,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("sensor.width", "frame dimensions must be >= 1"));
        }
        if self.z_min == 0 || self.z_min >= self.z_max {
            return Err(Error::config("sensor.z_min", "need 0 < z_min < z_max"));
        }
        if !(self.fx > 0.0) {
            return Err(Error::config("sensor.fx", "focal length must be > 0"));
        }
        if !(self.fy > 0.0) {
            return Err(Error::config("sensor.fy", "focal length must be > 0"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::config("sensor.cx", "principal point outside [0, width)"));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::config("sensor.cy", "principal point outside [0, height)"));
        }
        if !(self.noise_sigma_at_1m >= 0.0) {
            return Err(Error::config("sensor.noise_sigma_at_1m", "must be >= 0"));
        }
        if !(self.mounted_height > 0.0) {
            return Err(Error::config("sensor.mounted_height", "must be > 0"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Normalized inverted depth: 1 at `z_min` (nearest), 0 at `z_max` or beyond.
pub fn depth_to_proximity(depth_mm: f64, z_min: f64, z_max: f64) -> Result<f64> {
    if !(z_min < z_max) {
        return Err(Error::config("sensor.z_min", format!("z_min {z_min} must be below z_max {z_max}")));
    }
    Ok(((z_max - depth_mm) / (z_max - z_min)).clamp(0.0, 1.0))
}

/// R×C zone values in [0,1]; unknown zones hold 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    unknown: Vec<bool>,
}

impl ProximityGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, unknown: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
        }
        if values.len() != rows * cols || unknown.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} grid with {} values / {} flags",
                values.len(),
                unknown.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Precondition(format!("zone value {v} outside [0,1]")));
        }
        if let Some(i) = (0..values.len()).find(|&i| unknown[i] && values[i] != 1.0) {
            return Err(Error::Precondition(format!("unknown zone {i} must hold 1.0")));
        }
        Ok(ProximityGrid { rows, cols, values, unknown })
    }

    /// Grid with every zone known.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(rows, cols, values, vec![false; n])
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ProximityGrid { rows, cols, values: vec![0.0; rows * cols], unknown: vec![false; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn unknown_mask(&self) -> &[bool] {
        &self.unknown
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn is_unknown(&self, r: usize, c: usize) -> bool {
        self.unknown[r * self.cols + c]
    }

    /// Applies `f` to every known zone; unknown zones stay saturated at 1.0.
    pub fn map_known(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.unknown[i] { 1.0 } else { f(i, v).clamp(0.0, 1.0) })
            .collect();
        ProximityGrid { values, ..self.clone() }
    }

    /// Left/right mirror image of the grid.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let src = r * self.cols + (self.cols - 1 - c);
                out.values[r * self.cols + c] = self.values[src];
                out.unknown[r * self.cols + c] = self.unknown[src];
            }
        }
        out
    }
}
