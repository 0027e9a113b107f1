//! Depth-camera navigation aid.
//!
//! A simulated structured-light camera ([`simsensor`]) feeds a four-stage
//! chain: hole correction ([`correction`]), zoning into a proximity grid
//! ([`zoning`]), perceptual shaping ([`adapter`]) and audio/tactile encoding
//! ([`encoding`]). The [`harness`] walks a simulated agent through obstacle
//! courses on that feedback and reports travel times and collision counts.

pub mod adapter;
pub mod config;
pub mod correction;
pub mod encoding;
pub mod error;
pub mod frameio;
pub mod harness;
pub mod pipeline;
pub mod scene;
pub mod simsensor;
pub mod types;
pub mod zoning;

pub use config::PipelineConfig;
pub use encoding::{FeedbackCode, Modality};
pub use error::{Error, FormatError, Result};
pub use scene::Scene;
pub use types::{depth_to_proximity, DepthFrame, GuidanceFrame, Pose, ProximityGrid, SensorModel};
