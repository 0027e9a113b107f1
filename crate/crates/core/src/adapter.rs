//! Adapter stage: perceptual shaping applied to each zone before encoding.
//!
//! Chain order per tick: zone value -> [`adapt`] -> [`compress`] -> encoder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ProximityGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterParams {
    /// Compression exponent parameter; output is `p^(1/k)`.
    pub k: f64,
    /// Emphasis on departures from the running average.
    pub beta: f64,
    /// Retention of the running average per tick.
    pub alpha: f64,
    pub stroke_mm: f64,
    pub mm_per_step: f64,
}

impl Default for AdapterParams {
    fn default() -> Self {
        AdapterParams { k: 2.0, beta: 0.3, alpha: 0.95, stroke_mm: 20.0, mm_per_step: 0.1 }
    }
}

impl AdapterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 1.0) {
            return Err(Error::config("adapter.k", format!("{} is below 1", self.k)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::config("adapter.beta", "must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config("adapter.alpha", "must lie in [0,1)"));
        }
        if !(self.stroke_mm >= 0.0) {
            return Err(Error::config("adapter.stroke_mm", "must be >= 0"));
        }
        if !(self.mm_per_step > 0.0) {
            return Err(Error::config("adapter.mm_per_step", "must be > 0"));
        }
        Ok(())
    }
}

fn check_unit(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("proximity {p} outside [0,1]")))
    }
}

/// Power-law compression `p^(1/k)`; lifts mid-range proximities for `k > 1`.
pub fn compress(p: f64, k: f64) -> Result<f64> {
    check_unit(p)?;
    if !(k >= 1.0) {
        return Err(Error::config("adapter.k", format!("{k} is below 1")));
    }
    Ok(p.powf(k.recip()))
}

/// Exponential moving average of one feedback channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChannelState {
    pub ema: f64,
}

/// Updates the channel average and emphasizes the departure from it.
pub fn adapt(p: f64, state: ChannelState, params: &AdapterParams) -> Result<(f64, ChannelState)> {
    check_unit(p)?;
    let ema = params.alpha * state.ema + (1.0 - params.alpha) * p;
    let out = (p + params.beta * (p - ema)).clamp(0.0, 1.0);
    Ok((out, ChannelState { ema: ema.clamp(0.0, 1.0) }))
}

/// Commanded stepper steps for a belt actuator at `intensity`.
pub fn normalize_excursion(intensity: f64, params: &AdapterParams) -> Result<i64> {
    if !(params.mm_per_step > 0.0) {
        return Err(Error::config("adapter.mm_per_step", "must be > 0"));
    }
    check_unit(intensity)?;
    Ok((intensity * params.stroke_mm / params.mm_per_step).round() as i64)
}

/// Per-session adapter state: one channel per zone.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    channels: Vec<ChannelState>,
}

impl AdapterState {
    pub fn new(channels: usize) -> Self {
        AdapterState { channels: vec![ChannelState::default(); channels] }
    }

    pub fn channels(&self) -> &[ChannelState] {
        &self.channels
    }

    /// Runs adapt then compress on every zone. Unknown zones stay at 1.0 but
    /// still feed their channel average.
    pub fn shape(&mut self, grid: &ProximityGrid, params: &AdapterParams) -> Result<ProximityGrid> {
        if self.channels.len() != grid.values().len() {
            self.channels = vec![ChannelState::default(); grid.values().len()];
        }
        let mut shaped = Vec::with_capacity(self.channels.len());
        for (i, &p) in grid.values().iter().enumerate() {
            let (emphasized, next) = adapt(p, self.channels[i], params)?;
            self.channels[i] = next;
            shaped.push(compress(emphasized, params.k)?);
        }
        Ok(grid.map_known(|i, _| shaped[i]))
    }
}
