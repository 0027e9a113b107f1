//! 2.5-D rooms: box obstacles on a flat floor, a start pose and a goal disc.
//!
//! Scene files are TOML:
//!
//! ```toml
//! [room]            # floor rectangle [0, w] x [0, h], meters
//! w = 6.0
//! h = 4.0
//!
//! [[obstacles]]     # footprint [x, x + w] x [y, y + h]
//! x = 2.0
//! y = 1.5
//! w = 0.5
//! h = 0.5
//! height = 1.4
//! material = "diffuse"   # diffuse | reflective | transparent | absorbing
//!
//! [start]           # heading in radians, counter-clockwise from +x
//! x = 0.5
//! y = 2.0
//! heading = 0.0
//!
//! [goal]            # disc center and radius
//! x = 5.5
//! y = 2.0
//! r = 0.3
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Diffuse,
    Reflective,
    Transparent,
    Absorbing,
}

impl Material {
    /// Surfaces a structured-light sensor struggles with.
    pub fn is_problematic(self) -> bool {
        !matches!(self, Material::Diffuse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub w: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub height: f64,
    #[serde(default = "default_material")]
    pub material: Material,
}

fn default_material() -> Material {
    Material::Diffuse
}

impl Obstacle {
    pub fn diffuse(x: f64, y: f64, w: f64, h: f64, height: f64) -> Self {
        Obstacle { x, y, w, h, height, material: Material::Diffuse }
    }

    pub fn x_max(&self) -> f64 {
        self.x + self.w
    }

    pub fn y_max(&self) -> f64 {
        self.y + self.h
    }

    /// Distance from a floor point to the footprint (0 inside).
    pub fn distance_to(&self, px: f64, py: f64) -> f64 {
        let cx = px.clamp(self.x, self.x_max());
        let cy = py.clamp(self.y, self.y_max());
        ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Goal {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        ((px - self.x).powi(2) + (py - self.y).powi(2)).sqrt() <= self.r + 1e-9
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartPose {
    x: f64,
    y: f64,
    #[serde(default)]
    heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    room: Room,
    #[serde(default)]
    obstacles: Vec<Obstacle>,
    start: StartPose,
    goal: Goal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Room,
    pub obstacles: Vec<Obstacle>,
    pub start: Pose,
    pub goal: Goal,
}

impl Scene {
    pub fn new(room: Room, obstacles: Vec<Obstacle>, start: Pose, goal: Goal) -> Result<Self> {
        let scene = Scene { room, obstacles, start, goal };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.room.w > 0.0 && self.room.h > 0.0) {
            return Err(Error::config("room", "room sides must be > 0"));
        }
        if !self.contains(self.start.x, self.start.y) {
            return Err(Error::config("start", "start lies outside the room"));
        }
        if !(self.goal.r > 0.0) || !self.contains(self.goal.x, self.goal.y) {
            return Err(Error::config("goal", "goal needs r > 0 and a center inside the room"));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            let key = format!("obstacles[{i}]");
            if !(o.w > 0.0 && o.h > 0.0) {
                return Err(Error::config(key, "degenerate footprint"));
            }
            if !(o.height > 0.0) {
                return Err(Error::config(key, "height must be > 0"));
            }
            if o.x < 0.0 || o.y < 0.0 || o.x_max() > self.room.w || o.y_max() > self.room.h {
                return Err(Error::config(key, "footprint leaves the room"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=self.room.w).contains(&x) && (0.0..=self.room.h).contains(&y)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: SceneFile =
            toml::from_str(text).map_err(|e| Error::Parse { what: "scene".into(), message: e.to_string() })?;
        Scene::new(file.room, file.obstacles, Pose::new(file.start.x, file.start.y, file.start.heading), file.goal)
    }

    pub fn to_toml(&self) -> String {
        let file = SceneFile {
            room: self.room,
            obstacles: self.obstacles.clone(),
            start: StartPose { x: self.start.x, y: self.start.y, heading: self.start.heading },
            goal: self.goal,
        };
        toml::to_string(&file).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse { what: path.display().to_string(), message },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }
}
