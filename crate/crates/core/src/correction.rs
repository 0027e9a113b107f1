//! Correction stage: iterative joint-bilateral hole filling with a temporal
//! consistency map.
//!
//! Each pass visits the remaining holes and fills a hole `q` with the weighted
//! mean of the valid pixels `p` in its square window, where
//!
//! ```text
//! w(p, q) = exp(-|p - q|^2 / (2 sigma_s^2)) * exp(-|rgb(p) - rgb(q)|^2 / (2 sigma_c^2)) * c(p)
//! ```
//!
//! A hole is filled only when the summed weight reaches `min_weight`. Passes are
//! Jacobi-style: every candidate reads the previous pass's frame, so visit order
//! never matters. Valid input pixels are never touched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DepthFrame, GuidanceFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FillParams {
    pub window_radius: usize,
    pub sigma_spatial: f64,
    pub sigma_color: f64,
    pub max_iterations: usize,
    pub min_weight: f64,
}

impl Default for FillParams {
    fn default() -> Self {
        FillParams { window_radius: 5, sigma_spatial: 3.0, sigma_color: 20.0, max_iterations: 4, min_weight: 0.05 }
    }
}

impl FillParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_radius < 1 {
            return Err(Error::config("fill.window_radius", "must be >= 1"));
        }
        if !(self.sigma_spatial > 0.0) {
            return Err(Error::config("fill.sigma_spatial", "must be > 0"));
        }
        if !(self.sigma_color > 0.0) {
            return Err(Error::config("fill.sigma_color", "must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(Error::config("fill.max_iterations", "must be >= 1"));
        }
        if !(self.min_weight >= 0.0) {
            return Err(Error::config("fill.min_weight", "must be >= 0"));
        }
        Ok(())
    }
}

/// Per-pixel temporal stability weight in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyMap {
    width: usize,
    height: usize,
    c: Vec<f64>,
}

impl ConsistencyMap {
    pub fn uniform(width: usize, height: usize, value: f64) -> Self {
        ConsistencyMap { width, height, c: vec![value.clamp(0.0, 1.0); width * height] }
    }

    pub fn new(width: usize, height: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != width * height {
            return Err(Error::Dimension(format!("consistency map {width}x{height} with {} values", c.len())));
        }
        if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Precondition("consistency values must lie in [0,1]".into()));
        }
        Ok(ConsistencyMap { width, height, c })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn get(&self, i: usize) -> f64 {
        self.c[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyParams {
    pub enabled: bool,
    /// Millimeters.
    pub stability_tol: u16,
    pub gain: f64,
    pub floor: f64,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        ConsistencyParams { enabled: true, stability_tol: 50, gain: 0.2, floor: 0.2 }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(Error::config("consistency.gain", "must lie in (0,1]"));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            return Err(Error::config("consistency.floor", "must lie in [0,1]"));
        }
        Ok(())
    }
}

/// One step of the consistency update law.
///
/// A pixel valid in both frames whose depth moved at most `stability_tol`
/// ramps up by `gain` (saturating at 1); anything else drops to `floor`.
pub fn update_consistency(
    prev: &ConsistencyMap,
    prev_frame: &DepthFrame,
    cur_frame: &DepthFrame,
    params: &ConsistencyParams,
) -> Result<ConsistencyMap> {
    let (w, h) = (cur_frame.width(), cur_frame.height());
    if !prev_frame.same_shape(w, h) || prev.width != w || prev.height != h {
        return Err(Error::Dimension(format!(
            "consistency update over {}x{} map, {}x{} and {w}x{h} frames",
            prev.width,
            prev.height,
            prev_frame.width(),
            prev_frame.height()
        )));
    }
    let c = (0..cur_frame.len())
        .map(|i| match (prev_frame.get(i), cur_frame.get(i)) {
            (Some(a), Some(b)) if a.abs_diff(b) <= params.stability_tol => (prev.c[i] + params.gain).min(1.0),
            _ => params.floor,
        })
        .collect();
    Ok(ConsistencyMap { width: w, height: h, c })
}

/// Tracks the consistency map across a frame stream.
#[derive(Debug, Clone)]
pub struct ConsistencyTracker {
    params: ConsistencyParams,
    state: Option<(ConsistencyMap, DepthFrame)>,
}

impl ConsistencyTracker {
    pub fn new(params: ConsistencyParams) -> Self {
        ConsistencyTracker { params, state: None }
    }

    /// Feeds the next raw frame; the first one initializes every weight to `floor`.
    pub fn observe(&mut self, frame: &DepthFrame) -> Result<&ConsistencyMap> {
        let map = match self.state.take() {
            Some((map, prev)) if prev.same_shape(frame.width(), frame.height()) => {
                update_consistency(&map, &prev, frame, &self.params)?
            }
            _ => ConsistencyMap::uniform(frame.width(), frame.height(), self.params.floor),
        };
        self.state = Some((map, frame.clone()));
        Ok(&self.state.as_ref().expect("just set").0)
    }

    pub fn reset(&mut self) {
        self.state = None;
    }
}

/// Summed-area table of the validity mask, to skip holes with an empty window.
struct ValidCounts {
    width: usize,
    height: usize,
    sums: Vec<u32>,
}

impl ValidCounts {
    fn new(frame: &DepthFrame) -> Self {
        let (w, h) = (frame.width(), frame.height());
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += frame.is_valid(y * w + x) as u32;
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        ValidCounts { width: w, height: h, sums }
    }

    fn any_in_window(&self, x: usize, y: usize, r: usize) -> bool {
        let stride = self.width + 1;
        let (x0, y0) = (x.saturating_sub(r), y.saturating_sub(r));
        let (x1, y1) = ((x + r + 1).min(self.width), (y + r + 1).min(self.height));
        let s = &self.sums;
        s[y1 * stride + x1] + s[y0 * stride + x0] > s[y0 * stride + x1] + s[y1 * stride + x0]
    }
}

/// Dense per-pass inputs: depth, and consistency weight zeroed at holes, so
/// the window sums need no per-pixel branching. A masked pixel adds exact
/// zeros, leaving the sums unchanged.
struct Planes {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    weight: Vec<f64>,
}

impl Planes {
    fn new(frame: &DepthFrame, consistency: Option<&ConsistencyMap>) -> Self {
        let n = frame.len();
        let mut depth = vec![0.0; n];
        let mut weight = vec![0.0; n];
        for i in 0..n {
            if let Some(d) = frame.get(i) {
                depth[i] = d as f64;
                weight[i] = consistency.map_or(1.0, |c| c.get(i));
            }
        }
        Planes { width: frame.width(), height: frame.height(), depth, weight }
    }
}

/// Reusable joint-bilateral filler with precomputed weight tables.
#[derive(Debug, Clone)]
pub struct HoleFiller {
    params: FillParams,
    /// Spatial weights over the (2r+1)^2 window, row-major.
    spatial: Vec<f64>,
    /// Range weight indexed by squared RGB distance; zero past the end.
    color: Vec<f64>,
}

impl HoleFiller {
    pub fn new(params: FillParams) -> Result<Self> {
        params.validate()?;
        let r = params.window_radius as i64;
        let two_ss = 2.0 * params.sigma_spatial * params.sigma_spatial;
        let spatial = (-r..=r)
            .flat_map(|dy| (-r..=r).map(move |dx| (dx * dx + dy * dy) as f64))
            .map(|d2| (-d2 / two_ss).exp())
            .collect();
        let two_sc = 2.0 * params.sigma_color * params.sigma_color;
        let max_d2 = 3 * 255 * 255;
        let mut color = Vec::new();
        for d2 in 0..=max_d2 {
            let v = (-(d2 as f64) / two_sc).exp();
            if v < 1e-300 {
                break;
            }
            color.push(v);
        }
        Ok(HoleFiller { params, spatial, color })
    }

    pub fn params(&self) -> &FillParams {
        &self.params
    }

    #[inline]
    fn color_weight(&self, a: [u8; 3], b: [u8; 3]) -> f64 {
        let sq = |k: usize| {
            let d = a[k] as i32 - b[k] as i32;
            (d * d) as usize
        };
        let d2 = sq(0) + sq(1) + sq(2);
        self.color.get(d2).copied().unwrap_or(0.0)
    }

    /// Candidate for hole `q`, or `None` below `min_weight`.
    fn candidate(&self, planes: &Planes, guidance: Option<&GuidanceFrame>, q: usize) -> Option<u16> {
        let (w, h) = (planes.width, planes.height);
        let r = self.params.window_radius;
        let side = 2 * r + 1;
        let (qx, qy) = (q % w, q / w);
        let mut sum_w = 0.0;
        let mut sum_wd = 0.0;
        let y0 = qy.saturating_sub(r);
        let y1 = (qy + r).min(h - 1);
        let x0 = qx.saturating_sub(r);
        let x1 = (qx + r).min(w - 1);
        for y in y0..=y1 {
            let row = y * w;
            let spatial = &self.spatial[(y + r - qy) * side + x0 + r - qx..][..=x1 - x0];
            let weight = &planes.weight[row + x0..=row + x1];
            let depth = &planes.depth[row + x0..=row + x1];
            match guidance {
                Some(g) => {
                    let qc = g.get(q);
                    let rgb = &g.pixels()[row + x0..=row + x1];
                    for (((s, c), wp), d) in spatial.iter().zip(rgb).zip(weight).zip(depth) {
                        let wt = s * self.color_weight(*c, qc) * wp;
                        sum_w += wt;
                        sum_wd += wt * d;
                    }
                }
                None => {
                    for ((s, wp), d) in spatial.iter().zip(weight).zip(depth) {
                        let wt = s * wp;
                        sum_w += wt;
                        sum_wd += wt * d;
                    }
                }
            }
        }
        if sum_w > 0.0 && sum_w >= self.params.min_weight {
            Some((sum_wd / sum_w).round() as u16)
        } else {
            None
        }
    }

    /// One Jacobi pass over `holes`; returns the (pixel, depth) fills.
    fn pass(
        &self,
        frame: &DepthFrame,
        guidance: Option<&GuidanceFrame>,
        consistency: Option<&ConsistencyMap>,
        holes: &[usize],
    ) -> Vec<(usize, u16)> {
        let counts = ValidCounts::new(frame);
        let planes = Planes::new(frame, consistency);
        let r = self.params.window_radius;
        holes
            .iter()
            .filter(|&&q| counts.any_in_window(q % frame.width(), q / frame.width(), r))
            .filter_map(|&q| self.candidate(&planes, guidance, q).map(|d| (q, d)))
            .collect()
    }

    /// Fills holes in `depth`. Without guidance the color term is 1 (dark mode);
    /// without a consistency map every pixel weighs 1.
    pub fn fill(
        &self,
        depth: &DepthFrame,
        guidance: Option<&GuidanceFrame>,
        consistency: Option<&ConsistencyMap>,
    ) -> Result<DepthFrame> {
        let (w, h) = (depth.width(), depth.height());
        if let Some(g) = guidance {
            if g.width() != w || g.height() != h {
                return Err(Error::Dimension(format!("guidance {}x{} vs depth {w}x{h}", g.width(), g.height())));
            }
        }
        if let Some(c) = consistency {
            if c.width != w || c.height != h {
                return Err(Error::Dimension(format!("consistency {}x{} vs depth {w}x{h}", c.width, c.height)));
            }
        }
        let mut holes: Vec<usize> = (0..depth.len()).filter(|&i| !depth.is_valid(i)).collect();
        let mut frame = depth.clone();
        for _ in 0..self.params.max_iterations {
            if holes.is_empty() {
                break;
            }
            let fills = self.pass(&frame, guidance, consistency, &holes);
            if fills.is_empty() {
                break;
            }
            for &(q, d) in &fills {
                frame.set(q, d);
            }
            holes.retain(|&q| !frame.is_valid(q));
        }
        Ok(frame)
    }
}

/// One-shot joint-bilateral fill.
pub fn joint_bilateral_fill(
    depth: &DepthFrame,
    guidance: Option<&GuidanceFrame>,
    consistency: Option<&ConsistencyMap>,
    params: &FillParams,
) -> Result<DepthFrame> {
    HoleFiller::new(params.clone())?.fill(depth, guidance, consistency)
}

/// How well a fill recovered the holes of its input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillMetrics {
    /// Invalid pixels in the input.
    pub holes: usize,
    /// Of those, valid in the output.
    pub recovered: usize,
    /// Mean |filled - reference| over recovered pixels the reference knows;
    /// `None` without a reference or without such pixels.
    pub mae_mm: Option<f64>,
}

impl FillMetrics {
    /// Recovered fraction; vacuously 1 when there were no holes.
    pub fn coverage(&self) -> f64 {
        if self.holes == 0 {
            1.0
        } else {
            self.recovered as f64 / self.holes as f64
        }
    }
}

pub fn fill_metrics(input: &DepthFrame, filled: &DepthFrame, reference: Option<&DepthFrame>) -> Result<FillMetrics> {
    let (w, h) = (input.width(), input.height());
    if !filled.same_shape(w, h) || reference.is_some_and(|r| !r.same_shape(w, h)) {
        return Err(Error::Dimension("fill metrics over frames of different sizes".into()));
    }
    let (mut holes, mut recovered, mut err_sum, mut err_n) = (0usize, 0usize, 0.0f64, 0usize);
    for i in 0..input.len() {
        if input.is_valid(i) {
            continue;
        }
        holes += 1;
        let Some(d) = filled.get(i) else { continue };
        recovered += 1;
        if let Some(t) = reference.and_then(|r| r.get(i)) {
            err_sum += (d as f64 - t as f64).abs();
            err_n += 1;
        }
    }
    Ok(FillMetrics { holes, recovered, mae_mm: (err_n > 0).then(|| err_sum / err_n as f64) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    fn constant(w: usize, h: usize, d: u16) -> DepthFrame {
        DepthFrame::from_depths(w, h, vec![d; w * h], 0.0).unwrap()
    }

    fn with_holes(f: &DepthFrame, holes: &[usize]) -> DepthFrame {
        let mut f = f.clone();
        for &i in holes {
            f.invalidate(i);
        }
        f
    }

    #[test]
    fn metrics_count_recovery_and_error() {
        let reference = constant(4, 1, 1000);
        let input = with_holes(&reference, &[1, 2]);
        let mut filled = input.clone();
        filled.set(1, 1030);
        let m = fill_metrics(&input, &filled, Some(&reference)).unwrap();
        assert_eq!((m.holes, m.recovered), (2, 1));
        assert_eq!(m.coverage(), 0.5);
        assert_eq!(m.mae_mm, Some(30.0));
        let m = fill_metrics(&reference, &reference, None).unwrap();
        assert_eq!((m.coverage(), m.mae_mm), (1.0, None));
    }

    #[test]
    fn no_holes_is_identity() {
        let f = constant(12, 9, 1234);
        let g = GuidanceFrame::uniform(12, 9, [10, 20, 30]);
        let out = joint_bilateral_fill(&f, Some(&g), None, &FillParams::default()).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn hole_in_constant_window_takes_the_constant() {
        let f = with_holes(&constant(11, 11, 2000), &[60]);
        let g = GuidanceFrame::uniform(11, 11, [0, 0, 0]);
        let c = ConsistencyMap::uniform(11, 11, 0.2);
        let out = joint_bilateral_fill(&f, Some(&g), Some(&c), &FillParams::default()).unwrap();
        assert_eq!(out.get(60), Some(2000));
    }

    /// Direct evaluation of the weighted sum over the window, independent of
    /// the lookup tables and the pass machinery.
    fn oracle_fill(f: &DepthFrame, g: &GuidanceFrame, q: usize, p: &FillParams) -> Option<f64> {
        let (w, h) = (f.width() as i64, f.height() as i64);
        let (qx, qy) = ((q as i64) % w, (q as i64) / w);
        let r = p.window_radius as i64;
        let (mut sw, mut swd) = (0.0f64, 0.0f64);
        for y in (qy - r).max(0)..=(qy + r).min(h - 1) {
            for x in (qx - r).max(0)..=(qx + r).min(w - 1) {
                let i = (y * w + x) as usize;
                if let Some(d) = f.get(i) {
                    let ds = ((x - qx).pow(2) + (y - qy).pow(2)) as f64;
                    let (a, b) = (g.get(i), g.get(q));
                    let dc: f64 = (0..3).map(|k| (a[k] as f64 - b[k] as f64).powi(2)).sum();
                    let wt =
                        (-ds / (2.0 * p.sigma_spatial.powi(2))).exp() * (-dc / (2.0 * p.sigma_color.powi(2))).exp();
                    sw += wt;
                    swd += wt * d as f64;
                }
            }
        }
        (sw >= p.min_weight).then(|| swd / sw)
    }

    #[test]
    fn edge_preserving_fill_matches_weighted_sum_oracle() {
        // Left half red at 1000 mm, right half blue at 3000 mm.
        let (w, h) = (16, 9);
        let mut d = vec![0u16; w * h];
        let mut rgb = vec![[0u8; 3]; w * h];
        for y in 0..h {
            for x in 0..w {
                let left = x < 8;
                d[y * w + x] = if left { 1000 } else { 3000 };
                rgb[y * w + x] = if left { [255, 0, 0] } else { [0, 0, 255] };
            }
        }
        let q = 4 * w + 7; // last red column
        let f = with_holes(&DepthFrame::from_depths(w, h, d, 0.0).unwrap(), &[q]);
        let g = GuidanceFrame::new(w, h, rgb).unwrap();
        let params = FillParams { sigma_color: 5.0, max_iterations: 1, ..FillParams::default() };
        let expected = oracle_fill(&f, &g, q, &params).unwrap();
        assert!((expected - 1000.0).abs() < 50.0);
        let out = joint_bilateral_fill(&f, Some(&g), None, &params).unwrap();
        assert_eq!(out.get(q), Some(expected.round() as u16));

        // Without guidance the far side leaks in.
        let dark = joint_bilateral_fill(&f, None, None, &params).unwrap();
        assert!(dark.get(q).unwrap() > 1500);
    }

    #[test]
    fn isolated_hole_stays_invalid_below_min_weight() {
        let f = with_holes(&constant(3, 3, 1500), &[0, 1, 2, 3, 5, 6, 7, 8]);
        let params = FillParams { window_radius: 1, min_weight: 5.0, ..FillParams::default() };
        let out = joint_bilateral_fill(&f, None, None, &params).unwrap();
        assert_eq!(out.valid_count(), 1);
    }

    #[test]
    fn large_hole_grows_inward_over_passes() {
        let (w, h) = (30, 30);
        let holes: Vec<usize> =
            (0..w * h).filter(|i| (10..20).contains(&(i % w)) && (10..20).contains(&(i / w))).collect();
        let f = with_holes(&constant(w, h, 2500), &holes);
        let one =
            joint_bilateral_fill(&f, None, None, &FillParams { max_iterations: 1, ..FillParams::default() }).unwrap();
        let many =
            joint_bilateral_fill(&f, None, None, &FillParams { max_iterations: 6, ..FillParams::default() }).unwrap();
        assert!(one.valid_count() > f.valid_count());
        assert!(many.valid_count() >= one.valid_count());
        assert!((0..many.len()).all(|i| !one.is_valid(i) || many.is_valid(i)));
    }

    #[test]
    fn pass_is_visit_order_independent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (w, h) = (40, 30);
        let d: Vec<u16> = (0..w * h).map(|_| rng.gen_range(800..4000)).collect();
        let rgb: Vec<[u8; 3]> = (0..w * h).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let mut f = DepthFrame::from_depths(w, h, d, 0.0).unwrap();
        for i in 0..w * h {
            if rng.gen_bool(0.3) {
                f.invalidate(i);
            }
        }
        let g = GuidanceFrame::new(w, h, rgb).unwrap();
        let filler = HoleFiller::new(FillParams { sigma_color: 60.0, ..FillParams::default() }).unwrap();
        let holes: Vec<usize> = (0..w * h).filter(|&i| !f.is_valid(i)).collect();
        let mut forward = filler.pass(&f, Some(&g), None, &holes);
        let mut shuffled_holes = holes.clone();
        shuffled_holes.shuffle(&mut rng);
        let mut shuffled = filler.pass(&f, Some(&g), None, &shuffled_holes);
        forward.sort_unstable();
        shuffled.sort_unstable();
        assert_eq!(forward, shuffled);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let f = constant(4, 4, 1000);
        let g = GuidanceFrame::uniform(5, 4, [0, 0, 0]);
        assert!(matches!(joint_bilateral_fill(&f, Some(&g), None, &FillParams::default()), Err(Error::Dimension(_))));
        let c = ConsistencyMap::uniform(4, 3, 1.0);
        assert!(joint_bilateral_fill(&f, None, Some(&c), &FillParams::default()).is_err());
    }

    #[test]
    fn consistency_first_frame_ramp_and_reset() {
        let params = ConsistencyParams::default();
        let mut tracker = ConsistencyTracker::new(params.clone());
        let a = constant(4, 1, 2000);
        assert!(tracker.observe(&a).unwrap().values().iter().all(|&c| c == params.floor));
        let needed = ((1.0 - params.floor) / params.gain).ceil() as usize;
        for _ in 0..needed {
            tracker.observe(&a).unwrap();
        }
        assert!(tracker.observe(&a).unwrap().values().iter().all(|&c| c == 1.0));

        let mut tracker = ConsistencyTracker::new(params.clone());
        tracker.observe(&a).unwrap();
        for _ in 0..needed {
            tracker.observe(&a).unwrap();
        }
        assert_eq!(tracker.observe(&a).unwrap().get(0), 1.0);
        let jumped = constant(4, 1, 2500);
        assert_eq!(tracker.observe(&jumped).unwrap().get(0), params.floor);
    }

    #[test]
    fn consistency_ramp_reaches_one_in_exact_steps() {
        let params = ConsistencyParams::default();
        let f = constant(2, 1, 1000);
        let mut map = ConsistencyMap::uniform(2, 1, params.floor);
        let needed = ((1.0 - params.floor) / params.gain).ceil() as usize;
        for step in 0..needed {
            assert!(map.get(0) < 1.0, "saturated early at step {step}");
            map = update_consistency(&map, &f, &f, &params).unwrap();
        }
        assert_eq!(map.get(0), 1.0);
    }

    #[test]
    fn consistency_invalid_pixel_drops_to_floor() {
        let params = ConsistencyParams::default();
        let a = constant(2, 1, 1000);
        let b = with_holes(&a, &[1]);
        let map = ConsistencyMap::uniform(2, 1, 0.8);
        let out = update_consistency(&map, &a, &b, &params).unwrap();
        assert_eq!(out.values(), &[1.0, params.floor]);
        assert!(update_consistency(&map, &a, &constant(3, 1, 1000), &params).is_err());
    }
}
