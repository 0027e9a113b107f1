//! Encoding stage: proximity grid to audio voices or belt intensities.
//!
//! Audio: one voice per zone. Rows set pitch (upper image rows sound higher),
//! columns set stereo pan, the zone value sets loudness. Silent voices are
//! still emitted.
//!
//! Tactile: four actuators, left to right, each driven by the nearest
//! obstruction over the grid columns it covers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ProximityGrid;
use crate::zoning::column_min_proximity;

pub const BELT_ACTUATORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voice {
    pub row: usize,
    pub col: usize,
    pub frequency: f64,
    pub pan: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioCode {
    pub voices: Vec<Voice>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TactileCode {
    pub intensities: [f64; BELT_ACTUATORS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeedbackCode {
    Audio(AudioCode),
    Tactile(TactileCode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Tactile,
}

impl Modality {
    pub fn label(self) -> &'static str {
        match self {
            Modality::Audio => "A",
            Modality::Tactile => "T",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Tactile => "tactile",
        }
    }
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "audio" | "A" => Ok(Modality::Audio),
            "tactile" | "T" => Ok(Modality::Tactile),
            other => Err(Error::config("modality", format!("unknown modality {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioMap {
    /// Frequency of the bottom row, Hz.
    pub f0: f64,
    /// Octaves between the bottom and top rows.
    pub octave_span: f64,
}

impl Default for AudioMap {
    fn default() -> Self {
        AudioMap { f0: 220.0, octave_span: 1.0 }
    }
}

impl AudioMap {
    pub fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) {
            return Err(Error::config("audio.f0", "must be > 0"));
        }
        if !(self.octave_span > 0.0) {
            return Err(Error::config("audio.octave_span", "must be > 0"));
        }
        Ok(())
    }

    pub fn row_frequency(&self, row: usize, rows: usize) -> f64 {
        let steps = (rows - 1 - row) as f64 / (rows.max(2) - 1) as f64;
        self.f0 * 2f64.powf(self.octave_span * steps)
    }
}

pub fn column_pan(col: usize, cols: usize) -> f64 {
    if cols <= 1 {
        0.0
    } else {
        // Integer numerator, so mirrored columns get exactly opposite pans.
        ((2 * col) as f64 - (cols - 1) as f64) / (cols - 1) as f64
    }
}

pub fn encode_audio(grid: &ProximityGrid, map: &AudioMap) -> AudioCode {
    let (rows, cols) = (grid.rows(), grid.cols());
    let voices = (0..rows)
        .flat_map(|row| (0..cols).map(move |col| (row, col)))
        .map(|(row, col)| Voice {
            row,
            col,
            frequency: map.row_frequency(row, rows),
            pan: column_pan(col, cols),
            amplitude: grid.get(row, col),
        })
        .collect();
    AudioCode { voices }
}

/// Grid columns `[a*C/4, (a+1)*C/4)` driving actuator `a`. With fewer than four
/// columns that range can be empty; the actuator then takes column `a*C/4`.
pub fn actuator_columns(actuator: usize, cols: usize) -> (usize, usize) {
    let start = actuator * cols / BELT_ACTUATORS;
    let end = ((actuator + 1) * cols / BELT_ACTUATORS).max(start + 1);
    (start, end.min(cols))
}

pub fn encode_tactile(grid: &ProximityGrid) -> TactileCode {
    let columns = column_min_proximity(grid);
    let mut intensities = [0.0; BELT_ACTUATORS];
    for (a, slot) in intensities.iter_mut().enumerate() {
        let (start, end) = actuator_columns(a, columns.len());
        *slot = columns[start..end].iter().copied().fold(0.0, f64::max);
    }
    TactileCode { intensities }
}

pub fn encode(grid: &ProximityGrid, modality: Modality, map: &AudioMap) -> FeedbackCode {
    match modality {
        Modality::Audio => FeedbackCode::Audio(encode_audio(grid, map)),
        Modality::Tactile => FeedbackCode::Tactile(encode_tactile(grid)),
    }
}
