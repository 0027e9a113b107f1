//! Pipeline configuration file (TOML).
//!
//! Every section and key is optional; missing keys take the defaults below and
//! unknown keys are rejected. `PipelineConfig::default().to_toml()` prints the
//! complete resolved file:
//!
//! | section         | keys |
//! |-----------------|------|
//! | `[sensor]`      | width, height, fx, fy, cx, cy, z_min, z_max, noise_sigma_at_1m, mounted_height |
//! | `[artifact]`    | hole_rate_speckle, discontinuity_hole_width, problem_material_hole_rate, noise_scale, seed |
//! | `[fill]`        | window_radius, sigma_spatial, sigma_color, max_iterations, min_weight |
//! | `[consistency]` | enabled, stability_tol, gain, floor |
//! | `[zoning]`      | rows, cols, statistic (min_depth, mean_depth, max_depth), unknown_threshold |
//! | `[audio]`       | f0, octave_span |
//! | `[adapter]`     | k, beta, alpha, stroke_mm, mm_per_step |
//! | `[trial]`       | modality, dt, timeout, collision_debounce, seed |
//! | `[agent]`       | radius, speed, turn_rate_deg |
//! | `[policy]`      | near_threshold, goal_homing, goal_tolerance_deg |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapter::AdapterParams;
use crate::correction::{ConsistencyParams, FillParams};
use crate::encoding::AudioMap;
use crate::error::{Error, Result};
use crate::harness::{AgentParams, PolicyParams, TrialConfig};
use crate::simsensor::ArtifactModel;
use crate::types::SensorModel;
use crate::zoning::ZoneGridSpec;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sensor: SensorModel,
    pub artifact: ArtifactModel,
    pub fill: FillParams,
    pub consistency: ConsistencyParams,
    pub zoning: ZoneGridSpec,
    pub audio: AudioMap,
    pub adapter: AdapterParams,
    pub trial: TrialConfig,
    pub agent: AgentParams,
    pub policy: PolicyParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.artifact.validate()?;
        self.fill.validate()?;
        self.consistency.validate()?;
        self.zoning.validate_for(self.sensor.width, self.sensor.height)?;
        self.audio.validate()?;
        self.adapter.validate()?;
        self.trial.validate()?;
        self.agent.validate()?;
        self.policy.validate()?;
        Ok(())
    }

    /// Parses and validates a config document; missing keys take defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Parse { what: "config".into(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    /// The fully resolved configuration as a TOML document.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { what: path.display().to_string(), message },
            other => other,
        })
    }
}

/// Loads `path` when given, otherwise the defaults.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        assert_eq!(PipelineConfig::from_toml("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn defaults_are_the_documented_values() {
        let c = PipelineConfig::default();
        assert_eq!((c.sensor.width, c.sensor.height), (320, 240));
        assert_eq!((c.sensor.z_min, c.sensor.z_max), (800, 7500));
        assert_eq!(c.artifact.hole_rate_speckle, 0.02);
        assert_eq!(c.fill.window_radius, 5);
        assert_eq!(c.consistency.stability_tol, 50);
        assert_eq!((c.zoning.rows, c.zoning.cols), (3, 4));
        assert_eq!((c.adapter.k, c.adapter.alpha, c.adapter.beta), (2.0, 0.95, 0.3));
        assert_eq!(c.trial.dt, 0.1);
        assert_eq!(c.policy.near_threshold, 0.96);
    }

    #[test]
    fn out_of_range_names_the_key() {
        let err = PipelineConfig::from_toml("[adapter]\nk = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("adapter.k"), "{err}");
        let err = PipelineConfig::from_toml("[zoning]\nrows = 500\n").unwrap_err();
        assert!(err.to_string().contains("zoning.rows"), "{err}");
    }

    #[test]
    fn parse_error_carries_line_number() {
        let err = PipelineConfig::from_toml("[fill]\nwindow_radius = 3\nsigma_color = \"x\"\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("[fill]\nradius = 3\n").is_err());
        assert!(PipelineConfig::from_toml("[camera]\nfx = 3\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = PipelineConfig::from_toml("[adapter]\nk = 3.0\n[trial]\nmodality = \"tactile\"\n").unwrap();
        let echoed = c.to_toml();
        assert_eq!(PipelineConfig::from_toml(&echoed).unwrap(), c);
        assert_eq!(PipelineConfig::from_toml(&PipelineConfig::default().to_toml()).unwrap(), PipelineConfig::default());
    }
}
