//! Processing stage: reduces a corrected depth frame to an R×C proximity grid.
//!
//! Zone `(r, c)` covers pixel rows `[r*H/R, (r+1)*H/R)` and the analogous
//! columns (integer division), an exact partition of the frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{depth_to_proximity, DepthFrame, ProximityGrid, SensorModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneStatistic {
    MinDepth,
    MeanDepth,
    MaxDepth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZoneGridSpec {
    pub rows: usize,
    pub cols: usize,
    pub statistic: ZoneStatistic,
    /// A zone whose invalid fraction exceeds this is flagged unknown. At 1.0
    /// nothing is ever flagged and a zone without any valid pixel reads 0.0
    /// (nothing within range).
    pub unknown_threshold: f64,
}

impl Default for ZoneGridSpec {
    fn default() -> Self {
        ZoneGridSpec { rows: 3, cols: 4, statistic: ZoneStatistic::MinDepth, unknown_threshold: 0.5 }
    }
}

impl ZoneGridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 {
            return Err(Error::config("zoning.rows", "must be >= 1"));
        }
        if self.cols < 1 {
            return Err(Error::config("zoning.cols", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.unknown_threshold) {
            return Err(Error::config("zoning.unknown_threshold", "must lie in [0,1]"));
        }
        Ok(())
    }

    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        self.validate()?;
        if self.rows > height {
            return Err(Error::config("zoning.rows", format!("{} rows exceed frame height {height}", self.rows)));
        }
        if self.cols > width {
            return Err(Error::config("zoning.cols", format!("{} cols exceed frame width {width}", self.cols)));
        }
        Ok(())
    }
}

/// Half-open pixel range of zone `k` out of `zones` along an axis of `len` pixels.
pub fn zone_bounds(k: usize, zones: usize, len: usize) -> (usize, usize) {
    (k * len / zones, (k + 1) * len / zones)
}

pub fn zone_reduce(frame: &DepthFrame, spec: &ZoneGridSpec, sensor: &SensorModel) -> Result<ProximityGrid> {
    let (w, h) = (frame.width(), frame.height());
    spec.validate_for(w, h)?;
    let (z_min, z_max) = (sensor.z_min as f64, sensor.z_max as f64);
    let mut values = Vec::with_capacity(spec.rows * spec.cols);
    let mut unknown = Vec::with_capacity(spec.rows * spec.cols);
    for r in 0..spec.rows {
        let (y0, y1) = zone_bounds(r, spec.rows, h);
        for c in 0..spec.cols {
            let (x0, x1) = zone_bounds(c, spec.cols, w);
            let total = (y1 - y0) * (x1 - x0);
            let mut count = 0usize;
            let mut min = u16::MAX;
            let mut max = 0u16;
            let mut sum = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    if let Some(d) = frame.get(y * w + x) {
                        count += 1;
                        min = min.min(d);
                        max = max.max(d);
                        sum += d as u64;
                    }
                }
            }
            let invalid_fraction = (total - count) as f64 / total as f64;
            if invalid_fraction > spec.unknown_threshold {
                values.push(1.0);
                unknown.push(true);
                continue;
            }
            if count == 0 {
                values.push(0.0);
                unknown.push(false);
                continue;
            }
            let stat = match spec.statistic {
                ZoneStatistic::MinDepth => min as f64,
                ZoneStatistic::MaxDepth => max as f64,
                ZoneStatistic::MeanDepth => sum as f64 / count as f64,
            };
            values.push(depth_to_proximity(stat, z_min, z_max)?);
            unknown.push(false);
        }
    }
    ProximityGrid::new(spec.rows, spec.cols, values, unknown)
}

/// Nearest obstruction per bearing: the maximum proximity down each column.
pub fn column_min_proximity(grid: &ProximityGrid) -> Vec<f64> {
    (0..grid.cols()).map(|c| (0..grid.rows()).map(|r| grid.get(r, c)).fold(0.0, f64::max)).collect()
}
