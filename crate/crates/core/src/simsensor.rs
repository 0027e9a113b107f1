//! Synthetic structured-light depth camera.
//!
//! Ground truth comes from raycasting a [`Scene`]: walls are unbounded vertical
//! planes and obstacles are boxes standing on the floor. The camera looks along
//! the agent heading, mounted `mounted_height` meters above the floor. Depth is
//! optical-axis z in millimeters.
//!
//! [`inject_artifacts`] then degrades a clean frame the way consumer
//! structured-light cameras fail: random speckle dropouts, shadow bands along
//! depth discontinuities, dropouts on shiny/transparent/dark materials and
//! depth-dependent Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Material, Scene};
use crate::types::{DepthFrame, GuidanceFrame, Pose, Rgb, SensorModel};

/// The pseudo-random generator used for every seeded stream in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const WALL_COLOR: Rgb = [200, 200, 200];

/// Obstacle colors, pairwise far apart and far from the wall gray.
const PALETTE: [Rgb; 8] = [
    [220, 40, 40],
    [40, 60, 220],
    [30, 170, 60],
    [240, 200, 20],
    [150, 40, 180],
    [20, 190, 200],
    [240, 120, 20],
    [90, 60, 20],
];

pub fn obstacle_color(index: usize) -> Rgb {
    let base = PALETTE[index % PALETTE.len()];
    // Beyond the palette, shift brightness so colors stay unique.
    let shift = (index / PALETTE.len()) as u8 * 7;
    [base[0].wrapping_add(shift), base[1].wrapping_add(shift), base[2].wrapping_add(shift)]
}

/// Per-pixel id of the first surface a ray meets, transparent ones included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    None,
    Wall,
    Obstacle(usize),
}

/// Everything one raycast pass produces, pixel-aligned.
#[derive(Debug, Clone)]
pub struct Rendering {
    pub depth: DepthFrame,
    pub guidance: GuidanceFrame,
    /// Material of the first surface along each ray (transparent included).
    pub materials: Vec<Material>,
    /// Surface the ground-truth depth belongs to.
    pub surfaces: Vec<SurfaceId>,
}

#[derive(Clone, Copy)]
struct Span {
    t_in: f64,
    t_out: f64,
    index: usize,
}

/// Slab intersection of a floor ray with a footprint, restricted to t >= 0.
fn footprint_span(px: f64, py: f64, dx: f64, dy: f64, o: &crate::scene::Obstacle) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (p, d, lo, hi) in [(px, dx, o.x, o.x_max()), (py, dy, o.y, o.y_max())] {
        if d.abs() < 1e-15 {
            if p < lo || p > hi {
                return None;
            }
        } else {
            let a = (lo - p) / d;
            let b = (hi - p) / d;
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
    }
    if t1 < t0.max(0.0) {
        None
    } else {
        Some((t0.max(0.0), t1))
    }
}

fn wall_distance(px: f64, py: f64, dx: f64, dy: f64, w: f64, h: f64) -> f64 {
    let mut t = f64::INFINITY;
    if dx > 1e-15 {
        t = t.min((w - px) / dx);
    } else if dx < -1e-15 {
        t = t.min(-px / dx);
    }
    if dy > 1e-15 {
        t = t.min((h - py) / dy);
    } else if dy < -1e-15 {
        t = t.min(-py / dy);
    }
    t
}

/// First t in `[t0, t1]` at which the ray height lies within `[0, top]`.
fn vertical_hit(t0: f64, t1: f64, mount: f64, slope: f64, top: f64) -> Option<f64> {
    // height(t) = mount - slope * t
    let (lo, hi) = if slope.abs() < 1e-15 {
        if (0.0..=top).contains(&mount) {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            return None;
        }
    } else {
        let a = (mount - top) / slope;
        let b = mount / slope;
        (a.min(b), a.max(b))
    };
    let start = t0.max(lo);
    if start <= t1.min(hi) {
        Some(start)
    } else {
        None
    }
}

/// Raycasts depth, guidance colors and the material map in one pass.
pub fn render(scene: &Scene, pose: Pose, sensor: &SensorModel) -> Result<Rendering> {
    if !scene.contains(pose.x, pose.y) {
        return Err(Error::Precondition(format!("pose ({:.3}, {:.3}) lies outside the room", pose.x, pose.y)));
    }
    let (w, h) = (sensor.width, sensor.height);
    let n = w * h;
    let (fwd_x, fwd_y) = (pose.heading.cos(), pose.heading.sin());
    let (right_x, right_y) = (fwd_y, -fwd_x);

    let mut depth = vec![0u16; n];
    let mut valid = vec![false; n];
    let mut rgb = vec![WALL_COLOR; n];
    let mut materials = vec![Material::Diffuse; n];
    let mut surfaces = vec![SurfaceId::None; n];
    // Per column: wall distance and the obstacle footprints the floor ray
    // crosses before the wall; spans for column u live at
    // spans[offsets[u]..offsets[u + 1]].
    let mut t_walls = Vec::with_capacity(w);
    let mut spans: Vec<Span> = Vec::new();
    let mut offsets = Vec::with_capacity(w + 1);
    offsets.push(0);
    for u in 0..w {
        let a = (u as f64 - sensor.cx) / sensor.fx;
        let dx = fwd_x + a * right_x;
        let dy = fwd_y + a * right_y;
        let t_wall = wall_distance(pose.x, pose.y, dx, dy, scene.room.w, scene.room.h);
        for (index, o) in scene.obstacles.iter().enumerate() {
            if let Some((t_in, t_out)) = footprint_span(pose.x, pose.y, dx, dy, o) {
                if t_in < t_wall {
                    spans.push(Span { t_in, t_out, index });
                }
            }
        }
        t_walls.push(t_wall);
        offsets.push(spans.len());
    }

    for v in 0..h {
        let slope = (v as f64 - sensor.cy) / sensor.fy;
        for u in 0..w {
            let t_wall = t_walls[u];
            let mut t_hit = t_wall;
            let mut surface = SurfaceId::Wall;
            let mut t_first = t_wall;
            let mut first_material = Material::Diffuse;
            for s in &spans[offsets[u]..offsets[u + 1]] {
                let o = &scene.obstacles[s.index];
                if let Some(t) = vertical_hit(s.t_in, s.t_out, sensor.mounted_height, slope, o.height) {
                    if t < t_first {
                        t_first = t;
                        first_material = o.material;
                    }
                    if o.material != Material::Transparent && t < t_hit {
                        t_hit = t;
                        surface = SurfaceId::Obstacle(s.index);
                    }
                }
            }
            let i = v * w + u;
            materials[i] = first_material;
            surfaces[i] = surface;
            rgb[i] = match surface {
                SurfaceId::Obstacle(k) => obstacle_color(k),
                _ => WALL_COLOR,
            };
            let mm = (t_hit * 1000.0).round();
            if t_hit.is_finite() && mm >= sensor.z_min as f64 && mm <= sensor.z_max as f64 {
                depth[i] = mm as u16;
                valid[i] = true;
            }
        }
    }
    Ok(Rendering {
        depth: DepthFrame::new(w, h, depth, valid, 0.0)?,
        guidance: GuidanceFrame::new(w, h, rgb)?,
        materials,
        surfaces,
    })
}

/// Ground-truth depth: every in-range hit is valid.
pub fn raycast_depth(scene: &Scene, pose: Pose, sensor: &SensorModel) -> Result<DepthFrame> {
    render(scene, pose, sensor).map(|r| r.depth)
}

/// Flat-shaded colors: walls share one color, each obstacle has its own.
pub fn render_guidance(scene: &Scene, pose: Pose, sensor: &SensorModel) -> Result<GuidanceFrame> {
    render(scene, pose, sensor).map(|r| r.guidance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArtifactModel {
    /// Global dropout rate; also stands in for sunlight interference.
    pub hole_rate_speckle: f64,
    /// Half-width in pixels of the shadow band around depth jumps; 0 disables.
    pub discontinuity_hole_width: usize,
    pub problem_material_hole_rate: f64,
    /// Multiplier on `noise_sigma_at_1m * (z / 1000)^2`.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for ArtifactModel {
    fn default() -> Self {
        ArtifactModel {
            hole_rate_speckle: 0.02,
            discontinuity_hole_width: 2,
            problem_material_hole_rate: 0.6,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

impl ArtifactModel {
    /// A model that changes nothing.
    pub fn none() -> Self {
        ArtifactModel {
            hole_rate_speckle: 0.0,
            discontinuity_hole_width: 0,
            problem_material_hole_rate: 0.0,
            noise_scale: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (key, p) in [
            ("artifact.hole_rate_speckle", self.hole_rate_speckle),
            ("artifact.problem_material_hole_rate", self.problem_material_hole_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(key, format!("probability {p} outside [0,1]")));
            }
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::config("artifact.noise_scale", "must be >= 0"));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ArtifactModel { seed, ..self.clone() }
    }
}

/// Depth jump (mm) between 4-neighbors that casts a shadow band.
pub const DISCONTINUITY_JUMP_MM: u16 = 200;

/// Pixels within `width` (Chebyshev, exclusive) of a depth jump.
fn discontinuity_band(frame: &DepthFrame, width: usize) -> Vec<bool> {
    let (w, h) = (frame.width(), frame.height());
    let mut edge = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let Some(d) = frame.get(i) else { continue };
            let mut check = |j: usize| {
                if let Some(e) = frame.get(j) {
                    if d.abs_diff(e) > DISCONTINUITY_JUMP_MM {
                        edge[i] = true;
                        edge[j] = true;
                    }
                }
            };
            if x + 1 < w {
                check(i + 1);
            }
            if y + 1 < h {
                check(i + w);
            }
        }
    }
    let mut band = vec![false; w * h];
    if width == 0 {
        return band;
    }
    let r = width - 1;
    for y in 0..h {
        for x in 0..w {
            if !edge[y * w + x] {
                continue;
            }
            for yy in y.saturating_sub(r)..=(y + r).min(h - 1) {
                for xx in x.saturating_sub(r)..=(x + r).min(w - 1) {
                    band[yy * w + xx] = true;
                }
            }
        }
    }
    band
}

/// Degrades a frame with structured-light artifacts. Deterministic in `model.seed`.
///
/// Holes only ever grow; surviving depths stay inside `[z_min, z_max]`.
pub fn inject_artifacts(
    frame: &DepthFrame,
    materials: &[Material],
    model: &ArtifactModel,
    sensor: &SensorModel,
) -> Result<DepthFrame> {
    if materials.len() != frame.len() {
        return Err(Error::Dimension(format!(
            "material map has {} entries for a {}x{} frame",
            materials.len(),
            frame.width(),
            frame.height()
        )));
    }
    model.validate()?;
    let band = discontinuity_band(frame, model.discontinuity_hole_width);
    // Per-pixel draws dominate the cost; a xoshiro stream is several times
    // faster than the crate-wide ChaCha generator and just as reproducible.
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(model.seed);
    let mut out = frame.clone();
    let sigma_base = model.noise_scale * sensor.noise_sigma_at_1m;
    let (lo, hi) = (sensor.z_min as f64, sensor.z_max as f64);
    const UNIT: f64 = 1.0 / (1u64 << 32) as f64;
    for i in 0..frame.len() {
        let Some(d) = frame.get(i) else { continue };
        // One draw yields both uniforms: speckle from the high half,
        // material dropout from the low half.
        let bits: u64 = rng.gen();
        let speckle = (bits >> 32) as f64 * UNIT;
        let material = (bits & 0xFFFF_FFFF) as f64 * UNIT;
        let dropped = speckle < model.hole_rate_speckle
            || band[i]
            || (materials[i].is_problematic() && material < model.problem_material_hole_rate);
        if dropped {
            out.invalidate(i);
            continue;
        }
        if sigma_base > 0.0 {
            let noise: f64 = rng.sample(StandardNormal);
            let z = d as f64;
            let sigma = sigma_base * (z / 1000.0).powi(2);
            let noisy = (z + sigma * noise).round().clamp(lo, hi);
            out.set(i, noisy as u16);
        }
    }
    Ok(out)
}
