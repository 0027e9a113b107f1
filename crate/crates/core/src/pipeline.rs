//! The per-tick chain: degrade -> correct -> zone -> adapt -> encode.

use crate::adapter::AdapterState;
use crate::config::PipelineConfig;
use crate::correction::{ConsistencyTracker, HoleFiller};
use crate::encoding::{encode, FeedbackCode, Modality};
use crate::error::Result;
use crate::scene::Scene;
use crate::simsensor::{derive_seed, inject_artifacts, render};
use crate::types::{DepthFrame, GuidanceFrame, Pose, ProximityGrid};
use crate::zoning::zone_reduce;

/// Output of one pass through the chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub corrected: DepthFrame,
    pub grid: ProximityGrid,
    pub shaped: ProximityGrid,
    pub feedback: FeedbackCode,
}

/// Stateful processing chain for one frame stream (one session).
#[derive(Debug, Clone)]
pub struct Chain {
    config: PipelineConfig,
    modality: Modality,
    filler: HoleFiller,
    consistency: ConsistencyTracker,
    adapter: AdapterState,
}

impl Chain {
    pub fn new(config: &PipelineConfig, modality: Modality) -> Result<Self> {
        config.validate()?;
        Ok(Chain {
            filler: HoleFiller::new(config.fill.clone())?,
            consistency: ConsistencyTracker::new(config.consistency.clone()),
            adapter: AdapterState::new(config.zoning.rows * config.zoning.cols),
            modality,
            config: config.clone(),
        })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    /// Corrects one raw frame, updating the temporal consistency map.
    pub fn correct(&mut self, raw: &DepthFrame, guidance: Option<&GuidanceFrame>) -> Result<DepthFrame> {
        if self.config.consistency.enabled {
            let map = self.consistency.observe(raw)?;
            self.filler.fill(raw, guidance, Some(map))
        } else {
            self.filler.fill(raw, guidance, None)
        }
    }

    pub fn process(&mut self, raw: &DepthFrame, guidance: Option<&GuidanceFrame>) -> Result<ChainOutput> {
        let corrected = self.correct(raw, guidance)?;
        let grid = zone_reduce(&corrected, &self.config.zoning, &self.config.sensor)?;
        let shaped = self.adapter.shape(&grid, &self.config.adapter)?;
        let feedback = encode(&shaped, self.modality, &self.config.audio);
        Ok(ChainOutput { corrected, grid, shaped, feedback })
    }

    pub fn reset(&mut self) {
        self.consistency.reset();
        self.adapter = AdapterState::new(self.config.zoning.rows * self.config.zoning.cols);
    }
}

/// Simulated camera: clean render then artifacts seeded per tick.
pub fn sense(
    scene: &Scene,
    pose: Pose,
    config: &PipelineConfig,
    artifact_seed: u64,
    tick: u64,
) -> Result<(DepthFrame, GuidanceFrame)> {
    let r = render(scene, pose, &config.sensor)?;
    let model = config.artifact.with_seed(derive_seed(artifact_seed, tick));
    let degraded =
        inject_artifacts(&r.depth, &r.materials, &model, &config.sensor)?.with_timestamp(tick as f64 * config.trial.dt);
    Ok((degraded, r.guidance))
}
