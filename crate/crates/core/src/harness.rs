//! Trial protocol: walking paths, a simulated walker, TT/NoC metrics and
//! Table-1-style reports.
//!
//! A trial advances in ticks of `dt` seconds. Each tick applies the pending
//! action, resolves collisions, checks the goal and timeout, then senses the new
//! pose and runs the chain. The pilot's decision on that feedback is applied at
//! the next tick, so the first tick always executes the initial `stop`. The
//! interactive service runs the same [`TrialEngine`], so a scripted client and
//! [`run_trial`] see identical worlds.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::encoding::{FeedbackCode, Modality};
use crate::error::{Error, Result};
use crate::pipeline::{sense, Chain};
use crate::scene::{Goal, Obstacle, Room, Scene};
use crate::simsensor::{derive_seed, seeded_rng, SeededRng};
use crate::types::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub modality: Modality,
    pub dt: f64,
    pub timeout: f64,
    pub collision_debounce: f64,
    /// Artifact seed for the simulated camera.
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { modality: Modality::Audio, dt: 0.1, timeout: 300.0, collision_debounce: 1.0, seed: 0 }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::config("trial.dt", "must be > 0"));
        }
        if !(self.timeout > 0.0) {
            return Err(Error::config("trial.timeout", "must be > 0"));
        }
        if !(self.collision_debounce >= 0.0) {
            return Err(Error::config("trial.collision_debounce", "must be >= 0"));
        }
        Ok(())
    }

    pub fn timeout_ticks(&self) -> u64 {
        (self.timeout / self.dt).round() as u64
    }

    fn debounce_ticks(&self) -> u64 {
        (self.collision_debounce / self.dt).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentParams {
    pub radius: f64,
    /// Forward speed, m/s.
    pub speed: f64,
    pub turn_rate_deg: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams { radius: 0.2, speed: 0.5, turn_rate_deg: 45.0 }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::config("agent.radius", "must be > 0"));
        }
        if !(self.speed >= 0.0) {
            return Err(Error::config("agent.speed", "must be >= 0"));
        }
        if !(self.turn_rate_deg >= 0.0) {
            return Err(Error::config("agent.turn_rate_deg", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyParams {
    /// Bearing level at or above which the way ahead counts as blocked.
    pub near_threshold: f64,
    /// Steer toward the goal bearing when the way there is clear.
    pub goal_homing: bool,
    pub goal_tolerance_deg: f64,
    /// Within this distance of an aligned goal, keep walking unless something is
    /// inside the sensor's minimum range.
    pub final_approach_m: f64,
    /// How far below `near_threshold` the goal side must read before the
    /// walker turns back toward the goal.
    pub homing_margin: f64,
    /// Ticks of walking on after an avoidance turn before homing resumes.
    pub homing_hold_ticks: u32,
    /// Ticks spent turning away after bumping into something unseen.
    pub bump_turn_ticks: u32,
    /// Ticks of continuous avoidance turning after which anything short of
    /// contact counts as passable.
    pub patience_ticks: u32,
    /// Flank level at which the walker turns away even with the way ahead clear.
    pub side_threshold: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            near_threshold: 0.96,
            goal_homing: true,
            goal_tolerance_deg: 15.0,
            final_approach_m: 1.5,
            homing_margin: 0.02,
            homing_hold_ticks: 10,
            bump_turn_ticks: 10,
            patience_ticks: 40,
            side_threshold: 0.99,
        }
    }
}

impl PolicyParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.near_threshold) {
            return Err(Error::config("policy.near_threshold", "must lie in [0,1]"));
        }
        if !(self.goal_tolerance_deg >= 0.0) {
            return Err(Error::config("policy.goal_tolerance_deg", "must be >= 0"));
        }
        if !(self.final_approach_m >= 0.0) {
            return Err(Error::config("policy.final_approach_m", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.homing_margin) {
            return Err(Error::config("policy.homing_margin", "must lie in [0,1]"));
        }
        if !(0.0..=1.0).contains(&self.side_threshold) {
            return Err(Error::config("policy.side_threshold", "must lie in [0,1]"));
        }
        if self.patience_ticks == 0 {
            return Err(Error::config("policy.patience_ticks", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Forward,
    TurnLeft,
    TurnRight,
    Stop,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Forward => "forward",
            Action::TurnLeft => "turn_left",
            Action::TurnRight => "turn_right",
            Action::Stop => "stop",
        }
    }
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Action::Forward),
            "turn_left" => Ok(Action::TurnLeft),
            "turn_right" => Ok(Action::TurnRight),
            "stop" => Ok(Action::Stop),
            other => Err(Error::Parse { what: "action".into(), message: format!("unknown action {other:?}") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub radius: f64,
    pub speed: f64,
    /// rad/s
    pub turn_rate: f64,
}

impl AgentState {
    pub fn at(pose: Pose, params: &AgentParams) -> Self {
        AgentState {
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            radius: params.radius,
            speed: params.speed,
            turn_rate: params.turn_rate_deg.to_radians(),
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn disc_hits_scene(x: f64, y: f64, radius: f64, scene: &Scene) -> bool {
    x - radius <= 0.0
        || y - radius <= 0.0
        || x + radius >= scene.room.w
        || y + radius >= scene.room.h
        || scene.obstacles.iter().any(|o| o.distance_to(x, y) <= radius)
}

/// True when the agent disc touches an obstacle footprint or a wall.
pub fn collision_check(agent: &AgentState, scene: &Scene) -> bool {
    disc_hits_scene(agent.x, agent.y, agent.radius, scene)
}

/// What a pilot gets to know each tick.
#[derive(Debug, Clone)]
pub struct Observation {
    /// `None` before the first tick and for feedback-blind trials.
    pub feedback: Option<FeedbackCode>,
    /// Goal direction relative to the heading, counter-clockwise positive.
    pub goal_bearing: f64,
    pub goal_distance: f64,
    /// The last tick's movement ended in contact.
    pub bumped: bool,
}

impl Observation {
    pub fn new(feedback: Option<FeedbackCode>, pose: Pose, goal: &Goal, bumped: bool) -> Self {
        let (dx, dy) = (goal.x - pose.x, goal.y - pose.y);
        Observation {
            feedback,
            bumped,
            goal_bearing: wrap_angle(dy.atan2(dx) - pose.heading),
            goal_distance: (dx * dx + dy * dy).sqrt(),
        }
    }
}

pub trait Pilot {
    fn decide(&mut self, obs: &Observation) -> Action;

    /// Whether the pilot reads feedback; blind pilots skip the sensing chain.
    fn uses_feedback(&self) -> bool {
        true
    }
}

/// Obstruction level per bearing, left to right.
///
/// Audio: the loudest voice at each pan position. Tactile: the belt intensities.
pub fn bearing_levels(feedback: &FeedbackCode) -> Vec<f64> {
    match feedback {
        FeedbackCode::Tactile(t) => t.intensities.to_vec(),
        FeedbackCode::Audio(a) => {
            let mut buckets: Vec<(f64, f64)> = Vec::new();
            for v in &a.voices {
                match buckets.iter_mut().find(|(pan, _)| (pan - v.pan).abs() < 1e-9) {
                    Some((_, level)) => *level = level.max(v.amplitude),
                    None => buckets.push((v.pan, v.amplitude)),
                }
            }
            buckets.sort_by(|a, b| a.0.total_cmp(&b.0));
            buckets.into_iter().map(|(_, level)| level).collect()
        }
    }
}

/// Center, left and right maxima of a left-to-right level vector. The center
/// is the middle bucket, or the middle two for an even count.
pub fn split_levels(levels: &[f64]) -> (f64, f64, f64) {
    let n = levels.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let (c0, c1) = if n % 2 == 1 { (n / 2, n / 2 + 1) } else { ((n / 2).saturating_sub(1), n / 2 + 1) };
    let max = |s: &[f64]| s.iter().copied().fold(0.0, f64::max);
    (max(&levels[c0..c1]), max(&levels[..c0]), max(&levels[c1..]))
}

/// Reactive obstacle avoidance on the feedback code alone.
pub fn scripted_policy(feedback: &FeedbackCode, params: &PolicyParams) -> Action {
    let (center, left, right) = split_levels(&bearing_levels(feedback));
    if center < params.near_threshold {
        Action::Forward
    } else if left <= right {
        Action::TurnLeft
    } else {
        Action::TurnRight
    }
}

/// The feedback-driven walker: [`scripted_policy`]-style avoidance plus goal
/// homing.
///
/// Within a trial it remembers only the direction of an avoidance turn in
/// progress and how recently it avoided something; with 4.5° turn steps a purely
/// reactive rule can flip direction every tick at an obstacle's edge.
#[derive(Debug, Clone)]
pub struct ScriptedPilot {
    pub params: PolicyParams,
    turning: Option<Action>,
    homing_hold: u32,
    bump_turns: u32,
    bump_dir: Option<Action>,
    bump_count: u32,
    spin_ticks: u32,
}

impl ScriptedPilot {
    pub fn new(params: PolicyParams) -> Self {
        ScriptedPilot {
            params,
            turning: None,
            homing_hold: 0,
            bump_turns: 0,
            bump_dir: None,
            bump_count: 0,
            spin_ticks: 0,
        }
    }
}

impl Pilot for ScriptedPilot {
    fn decide(&mut self, obs: &Observation) -> Action {
        let Some(feedback) = &obs.feedback else {
            return Action::Stop;
        };
        let p = &self.params;
        let (center, left, right) = split_levels(&bearing_levels(feedback));
        let aligned = obs.goal_bearing.abs() <= p.goal_tolerance_deg.to_radians();
        if p.goal_homing && obs.goal_distance <= p.final_approach_m && !obs.bumped && self.bump_turns == 0 {
            // Close to the goal the far wall reads as an obstacle; home in
            // directly unless something is right in front.
            if !aligned {
                return if obs.goal_bearing > 0.0 { Action::TurnLeft } else { Action::TurnRight };
            }
            if center < 1.0 {
                self.turning = None;
                return Action::Forward;
            }
        }
        if obs.bumped && self.bump_turns == 0 {
            // Contact with something the camera cannot see (outside the field
            // of view or inside the minimum range). Swing toward the quieter
            // flank; if that bumps again, the obstacle is on that side, so
            // swing back the other way, further each time.
            let dir = match self.bump_dir {
                None => {
                    self.bump_count = 0;
                    if right < left {
                        Action::TurnRight
                    } else {
                        Action::TurnLeft
                    }
                }
                Some(Action::TurnLeft) => Action::TurnRight,
                Some(_) => Action::TurnLeft,
            };
            self.bump_count += 1;
            self.bump_dir = Some(dir);
            self.turning = Some(dir);
            self.bump_turns = p.bump_turn_ticks * self.bump_count;
        }
        if self.bump_turns > 0 {
            self.bump_turns -= 1;
            self.homing_hold = p.homing_hold_ticks;
            return self.turning.unwrap_or(Action::TurnLeft);
        }
        // The longer the walker has been turning on the spot, the closer it
        // lets things come, so a cramped spot still has a way out.
        let patience = (self.spin_ticks as f64 / p.patience_ticks.max(1) as f64).min(1.0);
        let near = p.near_threshold + (1.0 - p.near_threshold) * patience;
        let side = p.side_threshold + (1.0 - p.side_threshold) * patience;
        let blocked = center >= near;
        let brushed = left.max(right) >= side;
        if blocked || brushed {
            self.spin_ticks += 1;
            let turn = *self.turning.get_or_insert(if blocked {
                scripted_policy(feedback, p)
            } else if left >= right {
                Action::TurnRight
            } else {
                Action::TurnLeft
            });
            self.homing_hold = p.homing_hold_ticks;
            return turn;
        }
        self.turning = None;
        self.spin_ticks = 0;
        if self.homing_hold > 0 {
            self.homing_hold -= 1;
            return Action::Forward;
        }
        self.bump_dir = None;
        if p.goal_homing && !aligned {
            let (turn, side) =
                if obs.goal_bearing > 0.0 { (Action::TurnLeft, left) } else { (Action::TurnRight, right) };
            if side < p.near_threshold - p.homing_margin {
                return turn;
            }
        }
        Action::Forward
    }
}

/// Feedback-blind baseline: 70% forward, otherwise a uniformly chosen turn.
#[derive(Debug, Clone)]
pub struct RandomWalkPilot {
    rng: SeededRng,
}

impl RandomWalkPilot {
    pub fn new(seed: u64) -> Self {
        RandomWalkPilot { rng: seeded_rng(seed) }
    }
}

impl Pilot for RandomWalkPilot {
    fn decide(&mut self, _obs: &Observation) -> Action {
        if self.rng.gen_bool(0.7) {
            Action::Forward
        } else if self.rng.gen_bool(0.5) {
            Action::TurnLeft
        } else {
            Action::TurnRight
        }
    }

    fn uses_feedback(&self) -> bool {
        false
    }
}

/// Replays a fixed action list, then repeats the last action (stop if empty).
#[derive(Debug, Clone)]
pub struct ActionStream {
    actions: Vec<Action>,
    next: usize,
    with_feedback: bool,
}

impl ActionStream {
    pub fn new(actions: Vec<Action>) -> Self {
        ActionStream { actions, next: 0, with_feedback: false }
    }

    pub fn constant(action: Action) -> Self {
        Self::new(vec![action])
    }

    /// Still runs the sensing chain every tick.
    pub fn sensing(mut self) -> Self {
        self.with_feedback = true;
        self
    }
}

impl Pilot for ActionStream {
    fn decide(&mut self, _obs: &Observation) -> Action {
        let a = self.actions.get(self.next).or(self.actions.last()).copied().unwrap_or(Action::Stop);
        self.next += 1;
        a
    }

    fn uses_feedback(&self) -> bool {
        self.with_feedback
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Travel time, seconds.
    pub tt: f64,
    /// Number of (debounced) collisions.
    pub noc: u32,
    pub reached_goal: bool,
    pub trace: Vec<TraceSample>,
    /// Ticks at which a collision was counted.
    pub counted_collisions: Vec<u64>,
}

/// What one tick produced.
#[derive(Debug, Clone)]
pub struct TickReport {
    pub tick: u64,
    pub elapsed_s: f64,
    pub feedback: Option<FeedbackCode>,
    pub collided: bool,
    pub noc: u32,
    pub done: bool,
    pub reached_goal: bool,
    pub pose: Pose,
}

/// One trial's world state, advanced one tick at a time.
pub struct TrialEngine {
    scene: Scene,
    config: PipelineConfig,
    chain: Option<Chain>,
    agent: AgentState,
    artifact_seed: u64,
    tick: u64,
    noc: u32,
    last_counted: Option<u64>,
    counted: Vec<u64>,
    trace: Vec<TraceSample>,
    done: bool,
    reached: bool,
    bumped: bool,
}

impl TrialEngine {
    /// `sensing = false` skips the camera and chain (feedback-blind trials).
    pub fn new(
        scene: &Scene,
        config: &PipelineConfig,
        modality: Modality,
        artifact_seed: u64,
        sensing: bool,
    ) -> Result<Self> {
        config.validate()?;
        scene.validate()?;
        let chain = if sensing { Some(Chain::new(config, modality)?) } else { None };
        let agent = AgentState::at(scene.start, &config.agent);
        Ok(TrialEngine {
            scene: scene.clone(),
            config: config.clone(),
            chain,
            agent,
            artifact_seed,
            tick: 0,
            noc: 0,
            last_counted: None,
            counted: Vec::new(),
            trace: vec![TraceSample { t: 0.0, x: agent.x, y: agent.y, heading: agent.heading }],
            done: false,
            reached: false,
            bumped: false,
        })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn agent(&self) -> &AgentState {
        &self.agent
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn noc(&self) -> u32 {
        self.noc
    }

    pub fn observation(&self, feedback: Option<FeedbackCode>) -> Observation {
        Observation::new(feedback, self.agent.pose(), &self.scene.goal, self.bumped)
    }

    /// Moves forward, stopping at first contact when the full step would collide.
    fn advance(&mut self) -> bool {
        let dt = self.config.trial.dt;
        let step = self.agent.speed * dt;
        let (dx, dy) = (self.agent.heading.cos() * step, self.agent.heading.sin() * step);
        let (x0, y0, r) = (self.agent.x, self.agent.y, self.agent.radius);
        if !disc_hits_scene(x0 + dx, y0 + dy, r, &self.scene) {
            self.agent.x += dx;
            self.agent.y += dy;
            return false;
        }
        // Bisect for the furthest collision-free fraction of the step.
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if disc_hits_scene(x0 + mid * dx, y0 + mid * dy, r, &self.scene) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.agent.x = x0 + lo * dx;
        self.agent.y = y0 + lo * dy;
        true
    }

    pub fn step(&mut self, action: Action) -> Result<TickReport> {
        if self.done {
            return Err(Error::Precondition("trial already finished".into()));
        }
        let dt = self.config.trial.dt;
        self.tick += 1;
        let collided = match action {
            Action::Forward => self.advance(),
            Action::TurnLeft => {
                self.agent.heading = wrap_angle(self.agent.heading + self.agent.turn_rate * dt);
                false
            }
            Action::TurnRight => {
                self.agent.heading = wrap_angle(self.agent.heading - self.agent.turn_rate * dt);
                false
            }
            Action::Stop => false,
        };
        self.bumped = collided;
        if collided {
            let debounce = self.config.trial.debounce_ticks();
            if self.last_counted.is_none_or(|t| self.tick - t >= debounce) {
                self.noc += 1;
                self.last_counted = Some(self.tick);
                self.counted.push(self.tick);
            }
        }
        let elapsed_s = self.tick as f64 * dt;
        self.trace.push(TraceSample { t: elapsed_s, x: self.agent.x, y: self.agent.y, heading: self.agent.heading });
        self.reached = self.scene.goal.contains(self.agent.x, self.agent.y);
        self.done = self.reached || self.tick >= self.config.trial.timeout_ticks();
        let feedback = match &mut self.chain {
            Some(chain) => {
                let (raw, guidance) =
                    sense(&self.scene, self.agent.pose(), &self.config, self.artifact_seed, self.tick)?;
                Some(chain.process(&raw, Some(&guidance))?.feedback)
            }
            None => None,
        };
        Ok(TickReport {
            tick: self.tick,
            elapsed_s,
            feedback,
            collided,
            noc: self.noc,
            done: self.done,
            reached_goal: self.reached,
            pose: self.agent.pose(),
        })
    }

    /// Result so far; an unfinished trial counts as a timeout.
    pub fn result(&self) -> TrialResult {
        let tt = if self.reached { self.tick as f64 * self.config.trial.dt } else { self.config.trial.timeout };
        TrialResult {
            tt,
            noc: self.noc,
            reached_goal: self.reached,
            trace: self.trace.clone(),
            counted_collisions: self.counted.clone(),
        }
    }
}

/// Runs one trial to the goal or the timeout.
pub fn run_trial(
    scene: &Scene,
    pilot: &mut dyn Pilot,
    config: &PipelineConfig,
    modality: Modality,
    artifact_seed: u64,
) -> Result<TrialResult> {
    let mut engine = TrialEngine::new(scene, config, modality, artifact_seed, pilot.uses_feedback())?;
    let mut action = Action::Stop;
    loop {
        let report = engine.step(action)?;
        if report.done {
            break;
        }
        action = pilot.decide(&engine.observation(report.feedback));
    }
    Ok(engine.result())
}

pub const PATH_COUNT: usize = 4;
pub const PATH_OBSTACLES: usize = 5;
pub const ROOM: Room = Room { w: 6.0, h: 4.0 };
pub const PATH_START: Pose = Pose { x: 0.5, y: 2.0, heading: 0.0 };
pub const PATH_GOAL: Goal = Goal { x: 5.3, y: 2.0, r: 0.4 };
const MAX_ATTEMPTS: u32 = 10_000;
const GRID_STEP: f64 = 0.05;
/// Minimum walkable gap between any two boxes.
const BOX_GAP: f64 = 1.0;
/// Box placements tried before a partial layout is abandoned.
const LAYOUT_TRIES: u32 = 200;

/// Whether a disc of radius `clearance` can travel from the start to the goal
/// disc, searched on a 0.05 m grid (4-connected).
pub fn corridor_exists(scene: &Scene, clearance: f64) -> bool {
    let nx = (scene.room.w / GRID_STEP).floor() as usize;
    let ny = (scene.room.h / GRID_STEP).floor() as usize;
    let center = |i: usize| (i as f64 + 0.5) * GRID_STEP;
    let free = |ix: usize, iy: usize| {
        let (x, y) = (center(ix), center(iy));
        x >= clearance
            && y >= clearance
            && x <= scene.room.w - clearance
            && y <= scene.room.h - clearance
            && scene.obstacles.iter().all(|o| o.distance_to(x, y) >= clearance)
    };
    let cell = |v: f64, n: usize| ((v / GRID_STEP).floor() as usize).min(n - 1);
    let start = (cell(scene.start.x, nx), cell(scene.start.y, ny));
    if !free(start.0, start.1) {
        return false;
    }
    let mut seen = vec![false; nx * ny];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start.1 * nx + start.0] = true;
    while let Some((ix, iy)) = queue.pop_front() {
        if scene.goal.contains(center(ix), center(iy)) {
            return true;
        }
        let neighbors = [(ix.wrapping_sub(1), iy), (ix + 1, iy), (ix, iy.wrapping_sub(1)), (ix, iy + 1)];
        for (jx, jy) in neighbors {
            if jx < nx && jy < ny && !seen[jy * nx + jx] && free(jx, jy) {
                seen[jy * nx + jx] = true;
                queue.push_back((jx, jy));
            }
        }
    }
    false
}

/// Clearance the generated corridors guarantee for an agent of `radius`.
pub fn corridor_clearance(radius: f64) -> f64 {
    // Corridor width 2r + 0.2 m, i.e. the center keeps r + 0.1 m from everything.
    radius + 0.1
}

/// Shortest distance between two box footprints (0 when they overlap).
fn box_gap(a: &Obstacle, b: &Obstacle) -> f64 {
    let dx = (b.x - a.x_max()).max(a.x - b.x_max()).max(0.0);
    let dy = (b.y - a.y_max()).max(a.y - b.y_max()).max(0.0);
    dx.hypot(dy)
}

fn build_path(seed: u64, index: usize, agent_radius: f64) -> Result<Scene> {
    let mut rng = seeded_rng(derive_seed(seed, index as u64));
    let clearance = corridor_clearance(agent_radius);
    let lane = (PATH_START.y - clearance, PATH_START.y + clearance);
    for _ in 0..MAX_ATTEMPTS {
        let Some(obstacles) = sample_layout(&mut rng) else {
            continue;
        };
        // At least one box sits in the straight start-goal lane.
        let blocks_lane = obstacles.iter().any(|o| o.y < lane.1 && o.y_max() > lane.0);
        let scene = Scene::new(ROOM, obstacles, PATH_START, PATH_GOAL)?;
        if blocks_lane && corridor_exists(&scene, clearance) {
            return Ok(scene);
        }
    }
    Err(Error::Generation { seed, attempts: MAX_ATTEMPTS })
}

/// Places boxes one by one, rejecting each candidate that crowds the start,
/// the goal or an earlier box; gives up after [`LAYOUT_TRIES`] candidates.
fn sample_layout(rng: &mut SeededRng) -> Option<Vec<Obstacle>> {
    let mut obstacles: Vec<Obstacle> = Vec::with_capacity(PATH_OBSTACLES);
    for _ in 0..LAYOUT_TRIES {
        let w = rng.gen_range(0.4..=0.8);
        let h = rng.gen_range(0.4..=0.8);
        let height = rng.gen_range(1.0..=1.6);
        let x = rng.gen_range(1.2..=(5.2 - w));
        let y = rng.gen_range(0.2..=(ROOM.h - 0.2 - h));
        let o = Obstacle::diffuse(x, y, w, h, height);
        let clear_of_ends = o.distance_to(PATH_START.x, PATH_START.y) >= 0.8
            && o.distance_to(PATH_GOAL.x, PATH_GOAL.y) >= PATH_GOAL.r + 0.8;
        if clear_of_ends && obstacles.iter().all(|p| box_gap(&o, p) >= BOX_GAP) {
            obstacles.push(o);
            if obstacles.len() == PATH_OBSTACLES {
                return Some(obstacles);
            }
        }
    }
    None
}

/// Four walking paths of equal difficulty: same room, start, goal and number
/// of obstacles, each with a guaranteed corridor.
pub fn build_paths(seed: u64, agent_radius: f64) -> Result<Vec<Scene>> {
    (0..PATH_COUNT).map(|i| build_path(seed, i, agent_radius)).collect()
}

/// One row of the trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub modality: Modality,
    pub path: usize,
    pub seed: u64,
    pub trial_index: usize,
    pub tt_s: f64,
    pub noc: u32,
    pub reached_goal: bool,
}

impl TrialRecord {
    pub fn new(modality: Modality, path: usize, seed: u64, trial_index: usize, result: &TrialResult) -> Self {
        TrialRecord {
            modality,
            path,
            seed,
            trial_index,
            tt_s: result.tt,
            noc: result.noc,
            reached_goal: result.reached_goal,
        }
    }
}

pub const CSV_HEADER: [&str; 7] = ["modality", "path", "seed", "trial_index", "tt_s", "noc", "reached_goal"];

pub fn write_csv<W: Write>(out: W, records: &[TrialRecord], header: bool) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let csv_err = |e: csv::Error| Error::Io { path: "<csv>".into(), source: std::io::Error::other(e.to_string()) };
    if header {
        w.write_record(CSV_HEADER).map_err(csv_err)?;
    }
    for r in records {
        w.write_record([
            r.modality.name().to_string(),
            r.path.to_string(),
            r.seed.to_string(),
            r.trial_index.to_string(),
            format!("{:.1}", r.tt_s),
            r.noc.to_string(),
            r.reached_goal.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Mean TT and NoC per (modality, trial index).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub trial_indices: Vec<usize>,
    pub cells: BTreeMap<(Modality, usize), Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub mean_tt: f64,
    pub mean_noc: f64,
    pub runs: usize,
}

pub fn summarize(records: &[TrialRecord]) -> Summary {
    let mut sums: BTreeMap<(Modality, usize), (f64, f64, usize)> = BTreeMap::new();
    for r in records {
        let e = sums.entry((r.modality, r.trial_index)).or_default();
        e.0 += r.tt_s;
        e.1 += r.noc as f64;
        e.2 += 1;
    }
    let mut trial_indices: Vec<usize> = records.iter().map(|r| r.trial_index).collect();
    trial_indices.sort_unstable();
    trial_indices.dedup();
    let cells = sums
        .into_iter()
        .map(|(k, (tt, noc, n))| (k, Cell { mean_tt: tt / n as f64, mean_noc: noc / n as f64, runs: n }))
        .collect();
    Summary { trial_indices, cells }
}

/// Shortest decimal form with at most two decimals: 167, 4.5, 3.75.
pub fn format_number(v: f64) -> String {
    let s = format!("{:.2}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub const MISSING_CELL: &str = "n/a";

impl Summary {
    /// Builds a summary directly from cell means (used for reference tables).
    pub fn from_cells(trial_indices: Vec<usize>, cells: BTreeMap<(Modality, usize), Cell>) -> Self {
        Summary { trial_indices, cells }
    }

    pub fn tt_cell(&self, modality: Modality, trial: usize) -> String {
        match self.cells.get(&(modality, trial)) {
            Some(c) => format!("{} s", format_number(c.mean_tt)),
            None => MISSING_CELL.into(),
        }
    }

    pub fn noc_cell(&self, modality: Modality, trial: usize) -> String {
        match self.cells.get(&(modality, trial)) {
            Some(c) => format_number(c.mean_noc),
            None => MISSING_CELL.into(),
        }
    }

    /// Tab-separated table: rows TT(A), TT(T), NoC(A), NoC(T), one column per trial.
    pub fn render_table(&self) -> String {
        let mut out = String::from("Conf.");
        for t in &self.trial_indices {
            out.push_str(&format!("\tTrial n.{t}"));
        }
        out.push('\n');
        let rows: [(&str, Modality, bool); 4] = [
            ("TT", Modality::Audio, true),
            ("TT", Modality::Tactile, true),
            ("NoC", Modality::Audio, false),
            ("NoC", Modality::Tactile, false),
        ];
        for (metric, modality, is_tt) in rows {
            out.push_str(&format!("{metric}({})", modality.label()));
            for &t in &self.trial_indices {
                let cell = if is_tt { self.tt_cell(modality, t) } else { self.noc_cell(modality, t) };
                out.push('\t');
                out.push_str(&cell);
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable form: one JSON object per cell.
    pub fn to_json(&self) -> String {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|((m, t), c)| {
                serde_json::json!({
                    "modality": m.name(),
                    "trial_index": t,
                    "mean_tt_s": c.mean_tt,
                    "mean_noc": c.mean_noc,
                    "runs": c.runs,
                })
            })
            .collect();
        serde_json::to_string_pretty(&cells).expect("summary serializes")
    }
}
