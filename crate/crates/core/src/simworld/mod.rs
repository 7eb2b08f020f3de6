//! Simulated reach trials: a user points at a floor target, the pipeline
//! turns the oracle's estimates into a command and a robot drives it out
//! under localization error.
//!
//! World frame: floor at `z = 0`, `z` up. The robot frame sits at camera
//! mount height above the robot's floor position and turns with its heading.

mod localization;
mod robot;

pub use localization::{localization_update, LocalizationModel, Localizer};
pub use robot::{free_travel, guarded_step, robot_step, Obstacle, RobotParams, RobotState, Vec2};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PointingFeature, RigidTransform, UnitVec3, Vec3};
use crate::perception::{
    Frame, GroundTruth, NoiseProfile, OracleProvider, PerceptionError, ScenarioTag,
};
use crate::pipeline::{CommandMode, Pipeline, PipelineConfig, PipelineError, PipelineEvent, TargetKind};
use crate::sampling::{normal, stream_rng};

/// Bounds on the user-to-robot distance accepted by the world model, mm.
pub const USER_DISTANCE_LIMITS_MM: (f64, f64) = (500.0, 5000.0);

const MAX_SCENE_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error("no admissible scene after {attempts} attempts")]
    Scene { attempts: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotMode {
    /// Walks straight to the resolved floor point.
    Quadruped,
    /// Follows the floor line until something blocks it.
    Rover,
}

impl RobotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotMode::Quadruped => "quadruped",
            RobotMode::Rover => "rover",
        }
    }

    pub fn command_mode(self) -> CommandMode {
        match self {
            RobotMode::Quadruped => CommandMode::DirectGoal,
            RobotMode::Rover => CommandMode::FloorLine,
        }
    }
}

impl std::fmt::Display for RobotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RobotMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quadruped" => Ok(RobotMode::Quadruped),
            "rover" => Ok(RobotMode::Rover),
            other => Err(format!("unknown robot mode '{other}'")),
        }
    }
}

/// Normal distribution truncated by clipping, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClippedNormal {
    pub mean_mm: f64,
    pub std_mm: f64,
    pub min_mm: f64,
    pub max_mm: f64,
}

impl ClippedNormal {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        (self.mean_mm + normal(rng, self.std_mm)).clamp(self.min_mm, self.max_mm)
    }
}

/// Where the user stands and how they point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    /// Robot-to-user distance range, mm.
    pub distance_mm: [f64; 2],
    /// User bearing from the robot heading is uniform in `±bearing_deg`.
    pub bearing_deg: f64,
    pub shoulder_height_mm: f64,
    pub shoulder_height_jitter_mm: f64,
    /// Shoulder-to-fingertip length along the pointing line.
    pub reach_mm: f64,
    /// Accepted user-to-target floor distance range, mm.
    pub target_distance_mm: [f64; 2],
}

impl Default for UserModel {
    fn default() -> Self {
        UserModel {
            distance_mm: [1500.0, 3500.0],
            bearing_deg: 25.0,
            shoulder_height_mm: 1400.0,
            shoulder_height_jitter_mm: 60.0,
            reach_mm: 650.0,
            target_distance_mm: [1000.0, 5000.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradedLocalization {
    pub probability: f64,
    pub model: LocalizationModel,
}

/// Durations of the gesture phases, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GestureTiming {
    pub idle_s: [f64; 2],
    pub raise_s: f64,
    pub hold_s: f64,
    pub rest_s: f64,
    pub frame_rate_hz: f64,
}

impl Default for GestureTiming {
    fn default() -> Self {
        GestureTiming { idle_s: [0.5, 1.5], raise_s: 0.5, hold_s: 2.0, rest_s: 1.0, frame_rate_hz: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub mode: RobotMode,
    /// Camera mount height above the floor, mm.
    pub camera_height_mm: f64,
    /// Camera position in the robot frame, mm.
    pub camera_offset_mm: Vec3,
    /// Upward tilt of the camera axis, degrees.
    pub camera_tilt_deg: f64,
    pub user: UserModel,
    /// Robot-to-target distance at pointing time.
    pub target_distance: ClippedNormal,
    /// Scenes whose true camera-frame yaw exceeds this are resampled.
    pub max_true_yaw_deg: f64,
    pub timing: GestureTiming,
    pub tag: ScenarioTag,
    pub pipeline: PipelineConfig,
    pub robot: RobotParams,
    pub robot_radius_mm: f64,
    pub standoff_mm: f64,
    pub localization: LocalizationModel,
    /// Chance per trial that the route is poor in localization features, and
    /// the error model used on such routes.
    pub degraded_localization: Option<DegradedLocalization>,
    /// Localization steps taken before the trial starts.
    pub burn_in_steps: usize,
    /// Static obstacles in world coordinates.
    pub obstacles: Vec<Obstacle>,
    /// A disc obstacle of this radius is placed on the target when set.
    pub bench_radius_mm: Option<f64>,
    pub success_radius_mm: f64,
    /// How far along the floor line the rover goes when nothing stops it.
    pub line_max_mm: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self::quadruped()
    }
}

impl WorldConfig {
    pub fn quadruped() -> Self {
        WorldConfig {
            mode: RobotMode::Quadruped,
            camera_height_mm: 500.0,
            camera_offset_mm: Vec3::new(200.0, 0.0, 0.0),
            camera_tilt_deg: 15.0,
            user: UserModel::default(),
            target_distance: ClippedNormal { mean_mm: 3400.0, std_mm: 1200.0, min_mm: 1200.0, max_mm: 7000.0 },
            max_true_yaw_deg: 110.0,
            timing: GestureTiming::default(),
            tag: ScenarioTag::Nominal,
            pipeline: PipelineConfig { mode: CommandMode::DirectGoal, ..PipelineConfig::default() },
            robot: RobotParams::default(),
            robot_radius_mm: 300.0,
            standoff_mm: 300.0,
            localization: LocalizationModel::RtkDrift { step_sigma_mm: 35.0, bound_mm: 400.0 },
            degraded_localization: None,
            burn_in_steps: 200,
            obstacles: Vec::new(),
            bench_radius_mm: None,
            success_radius_mm: 1000.0,
            line_max_mm: 15_000.0,
        }
    }

    pub fn rover() -> Self {
        WorldConfig {
            mode: RobotMode::Rover,
            camera_height_mm: 700.0,
            camera_tilt_deg: 10.0,
            user: UserModel { target_distance_mm: [1500.0, 10_000.0], ..UserModel::default() },
            target_distance: ClippedNormal { mean_mm: 7200.0, std_mm: 2500.0, min_mm: 3000.0, max_mm: 12_000.0 },
            pipeline: PipelineConfig { mode: CommandMode::FloorLine, ..PipelineConfig::default() },
            robot_radius_mm: 150.0,
            standoff_mm: 100.0,
            localization: LocalizationModel::LidarGaussian { sigma_mm: 30.0 },
            degraded_localization: Some(DegradedLocalization {
                probability: 0.2,
                model: LocalizationModel::RtkDrift { step_sigma_mm: 60.0, bound_mm: 1500.0 },
            }),
            bench_radius_mm: Some(150.0),
            ..Self::quadruped()
        }
    }

    pub fn for_mode(mode: RobotMode) -> Self {
        match mode {
            RobotMode::Quadruped => Self::quadruped(),
            RobotMode::Rover => Self::rover(),
        }
    }

    /// Same world with localization error switched off.
    pub fn without_localization_noise(mut self) -> Self {
        self.degraded_localization = None;
        self.localization = match self.localization {
            LocalizationModel::RtkDrift { bound_mm, .. } => LocalizationModel::RtkDrift { step_sigma_mm: 0.0, bound_mm },
            LocalizationModel::LidarGaussian { .. } => LocalizationModel::NONE,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SimError::Config(m));
        if !(self.camera_height_mm > 0.0) || !self.camera_height_mm.is_finite() {
            return err(format!("camera height {} mm must be positive", self.camera_height_mm));
        }
        let [u0, u1] = self.user.distance_mm;
        let (lo, hi) = USER_DISTANCE_LIMITS_MM;
        if !(u0 >= lo && u1 <= hi && u0 <= u1) {
            return err(format!("user distance range [{u0}, {u1}] mm must lie within [{lo}, {hi}] mm"));
        }
        let [l0, l1] = self.user.target_distance_mm;
        if !(l0 > self.user.reach_mm && l0 <= l1) {
            return err(format!("user-to-target range [{l0}, {l1}] mm is invalid"));
        }
        if !(self.user.reach_mm > 0.0 && self.user.shoulder_height_mm > self.user.reach_mm) {
            return err("user shoulder height must exceed the arm reach".into());
        }
        if !(0.0..90.0).contains(&self.user.bearing_deg) {
            return err("user bearing must lie in [0, 90) degrees".into());
        }
        let d = &self.target_distance;
        if !(d.std_mm >= 0.0 && d.min_mm > 0.0 && d.min_mm <= d.max_mm) {
            return err("target distance distribution is invalid".into());
        }
        if !(self.max_true_yaw_deg > 0.0 && self.max_true_yaw_deg <= 180.0) {
            return err("max true yaw must lie in (0, 180] degrees".into());
        }
        if self.camera_tilt_deg.abs() >= 90.0 || !self.camera_offset_mm.is_finite() {
            return err("camera mounting is invalid".into());
        }
        let t = &self.timing;
        if !(t.frame_rate_hz > 0.0 && t.idle_s[0] >= 0.0 && t.idle_s[0] <= t.idle_s[1] && t.raise_s >= 0.0)
            || !(t.hold_s > 0.0 && t.rest_s >= 0.0)
        {
            return err("gesture timing is invalid".into());
        }
        let r = &self.robot;
        if !(r.speed_mm_s > 0.0 && r.turn_rate_deg_s > 0.0 && r.dt_s > 0.0 && r.arrive_tolerance_mm >= 0.0)
            || !(r.turn_gate_deg >= 0.0)
            || r.max_steps == 0
        {
            return err("robot parameters are invalid".into());
        }
        if !(self.robot_radius_mm >= 0.0 && self.standoff_mm >= 0.0) {
            return err("robot radius and standoff must be non-negative".into());
        }
        if !(self.success_radius_mm > 0.0 && self.line_max_mm > 0.0) {
            return err("success radius and line length must be positive".into());
        }
        if self.bench_radius_mm.is_some_and(|b| !(b > 0.0)) {
            return err("bench radius must be positive".into());
        }
        self.localization.validate().map_err(SimError::Config)?;
        if let Some(d) = &self.degraded_localization {
            if !(0.0..=1.0).contains(&d.probability) {
                return err("degraded localization probability must lie in [0, 1]".into());
            }
            d.model.validate().map_err(SimError::Config)?;
        }
        self.pipeline.validate()?;
        Ok(())
    }

    /// Camera-to-robot transform: tilt about the lateral axis, then offset.
    pub fn camera_to_robot(&self) -> RigidTransform {
        RigidTransform::rotation_y(-self.camera_tilt_deg.to_radians()).with_translation(self.camera_offset_mm)
    }

    /// Robot-frame to world transform for a floor pose.
    pub fn robot_to_world(&self, position: Vec2, heading: f64) -> RigidTransform {
        RigidTransform::rotation_z(heading).with_translation(Vec3::new(position.x, position.y, self.camera_height_mm))
    }
}

/// A sampled arrangement of robot, user and target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scene {
    pub robot_start: Vec2,
    pub robot_heading: f64,
    pub user: Vec2,
    pub target: Vec2,
    pub shoulder: Vec3,
    pub fingertip: Vec3,
    /// True pointing feature in the camera frame.
    pub pointing: PointingFeature,
    /// Arm-down pose in the camera frame.
    pub resting: PointingFeature,
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 { ((p - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    p.distance(a + ab * t)
}

pub fn sample_scene<R: Rng + ?Sized>(world: &WorldConfig, rng: &mut R) -> Result<Scene> {
    let cam_to_world_at = |pos: Vec2, heading: f64| world.robot_to_world(pos, heading).compose(&world.camera_to_robot());
    for _ in 0..MAX_SCENE_ATTEMPTS {
        let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let start = Vec2::ZERO;
        let [u0, u1] = world.user.distance_mm;
        let user_r = if u1 > u0 { rng.gen_range(u0..=u1) } else { u0 };
        let b = world.user.bearing_deg.to_radians();
        let bearing = if b > 0.0 { rng.gen_range(-b..=b) } else { 0.0 };
        let user = start + Vec2::from_angle(heading + bearing) * user_r;
        let target_r = world.target_distance.sample(rng);
        let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        let target = start + Vec2::from_angle(heading + phi) * target_r;
        let shoulder_h = world.user.shoulder_height_mm + normal(rng, world.user.shoulder_height_jitter_mm);

        let [l0, l1] = world.user.target_distance_mm;
        let lever = user.distance(target);
        if !(l0..=l1).contains(&lever) {
            continue;
        }
        let clearance = world.robot_radius_mm + world.standoff_mm;
        if target.distance(start) < clearance + world.bench_radius_mm.unwrap_or(0.0) {
            continue;
        }
        let shoulder = Vec3::new(user.x, user.y, shoulder_h);
        let aim = UnitVec3::new_normalize(Vec3::new(target.x, target.y, 0.0) - shoulder)?;
        let fingertip = shoulder + aim.as_vec() * world.user.reach_mm;

        if let Some(r) = world.bench_radius_mm {
            // The approach to the line start must not already be blocked.
            let line_start = Vec2::new(fingertip.x, fingertip.y);
            if point_segment_distance(target, start, line_start) < r + clearance + world.standoff_mm {
                continue;
            }
        }
        let world_to_cam = cam_to_world_at(start, heading).inverse();
        let pointing = PointingFeature::from_direction(
            world_to_cam.transform_point(fingertip),
            world_to_cam.transform_direction(aim),
        )?;
        if pointing.yaw_deg().abs() > world.max_true_yaw_deg {
            continue;
        }
        let toward = (target - user) * (0.25 / lever);
        let hang = UnitVec3::new_normalize(Vec3::new(toward.x, toward.y, -1.0))?;
        let resting = PointingFeature::from_direction(
            world_to_cam.transform_point(shoulder + hang.as_vec() * world.user.reach_mm),
            world_to_cam.transform_direction(hang),
        )?;
        return Ok(Scene { robot_start: start, robot_heading: heading, user, target, shoulder, fingertip, pointing, resting });
    }
    Err(SimError::Scene { attempts: MAX_SCENE_ATTEMPTS })
}

/// Frame stream for one gesture: arm down, raising, holding the point,
/// lowered again.
pub fn gesture_frames<R: Rng + ?Sized>(world: &WorldConfig, scene: &Scene, rng: &mut R) -> Vec<Frame> {
    let t = &world.timing;
    let idle = if t.idle_s[1] > t.idle_s[0] { rng.gen_range(t.idle_s[0]..=t.idle_s[1]) } else { t.idle_s[0] };
    let dt = 1.0 / t.frame_rate_hz;
    let count = |s: f64| (s * t.frame_rate_hz).round() as usize;
    let phases = [
        (count(idle), false, scene.resting),
        (count(t.raise_s), false, scene.resting),
        (count(t.hold_s).max(1), true, scene.pointing),
        (count(t.rest_s), false, scene.resting),
    ];
    let mut frames = Vec::new();
    for (n, is_pointing, feature) in phases {
        for _ in 0..n {
            let ts = (frames.len() + 1) as f64 * dt;
            let gt = GroundTruth { is_pointing, feature: Some(feature) };
            frames.push(Frame::new(ts, Some(gt)).with_tag(world.tag));
        }
    }
    frames
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialOutcome {
    /// Reached the commanded goal.
    Arrived,
    /// Stopped at the standoff in front of an obstacle.
    Blocked,
    /// Drove the whole floor line without meeting an obstacle.
    LineEnd,
    StepLimit,
    /// The gesture never triggered the pipeline.
    NoCommand,
    DispatchFailed,
}

impl TrialOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            TrialOutcome::Arrived => "arrived",
            TrialOutcome::Blocked => "blocked",
            TrialOutcome::LineEnd => "line_end",
            TrialOutcome::StepLimit => "step_limit",
            TrialOutcome::NoCommand => "no_command",
            TrialOutcome::DispatchFailed => "dispatch_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub mode: RobotMode,
    pub true_target_mm: Vec2,
    /// Goal in world coordinates as the robot believed it. For the rover
    /// this is the start of the floor line.
    pub commanded_goal_mm: Option<Vec2>,
    /// Heading of the floor line, degrees (rover only).
    pub line_heading_deg: Option<f64>,
    pub final_position_mm: Vec2,
    /// Floor distance from the final position to the true target.
    pub reach_error_mm: f64,
    pub success: bool,
    /// Robot-to-target distance when the user pointed.
    pub distance_to_target_mm: f64,
    pub user_distance_mm: f64,
    pub outcome: TrialOutcome,
    /// True positions visited, starting with the start position.
    #[serde(skip)]
    pub path: Vec<Vec2>,
}

/// Flat CSV form of a [`TrialRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: u64,
    pub seed: u64,
    pub mode: RobotMode,
    pub target_x_mm: f64,
    pub target_y_mm: f64,
    pub goal_x_mm: Option<f64>,
    pub goal_y_mm: Option<f64>,
    pub line_heading_deg: Option<f64>,
    pub final_x_mm: f64,
    pub final_y_mm: f64,
    pub reach_error_mm: f64,
    pub success: bool,
    pub distance_to_target_mm: f64,
    pub user_distance_mm: f64,
    pub outcome: TrialOutcome,
}

impl From<&TrialRecord> for TrialRow {
    fn from(r: &TrialRecord) -> Self {
        TrialRow {
            trial: r.trial,
            seed: r.seed,
            mode: r.mode,
            target_x_mm: r.true_target_mm.x,
            target_y_mm: r.true_target_mm.y,
            goal_x_mm: r.commanded_goal_mm.map(|g| g.x),
            goal_y_mm: r.commanded_goal_mm.map(|g| g.y),
            line_heading_deg: r.line_heading_deg,
            final_x_mm: r.final_position_mm.x,
            final_y_mm: r.final_position_mm.y,
            reach_error_mm: r.reach_error_mm,
            success: r.success,
            distance_to_target_mm: r.distance_to_target_mm,
            user_distance_mm: r.user_distance_mm,
            outcome: r.outcome,
        }
    }
}

/// Per-trial random streams, all derived from one seed.
struct TrialStreams {
    scene: ChaCha8Rng,
    perception: ChaCha8Rng,
    localization: ChaCha8Rng,
}

impl TrialStreams {
    fn new(seed: u64, trial: u64) -> Self {
        TrialStreams {
            scene: stream_rng(seed, 3 * trial),
            perception: stream_rng(seed, 3 * trial + 1),
            localization: stream_rng(seed, 3 * trial + 2),
        }
    }
}

struct Drive<'a> {
    world: &'a WorldConfig,
    obstacles: &'a [Obstacle],
    localizer: Localizer,
    rng: ChaCha8Rng,
    state: RobotState,
    path: Vec<Vec2>,
    steps: usize,
}

enum Leg {
    Arrived,
    Blocked,
    StepLimit,
}

impl Drive<'_> {
    fn leg(&mut self, goal: Vec2) -> Leg {
        let p = &self.world.robot;
        while self.steps < p.max_steps {
            self.steps += 1;
            self.state.believed_position = self.localizer.update(self.state.position, &mut self.rng);
            let (next, blocked) = guarded_step(
                &self.state,
                goal,
                p,
                self.obstacles,
                self.world.robot_radius_mm,
                self.world.standoff_mm,
            );
            if next.position != self.state.position {
                self.path.push(next.position);
            }
            self.state = next;
            if blocked {
                return Leg::Blocked;
            }
            if self.state.believed_position.distance(goal) <= p.arrive_tolerance_mm {
                return Leg::Arrived;
            }
        }
        Leg::StepLimit
    }
}

/// Runs trial `0` of `seed`.
pub fn run_trial(world: &WorldConfig, profile: &NoiseProfile, seed: u64) -> Result<TrialRecord> {
    run_trial_indexed(world, profile, seed, 0)
}

/// Runs one trial on the random streams of `(seed, trial)`.
pub fn run_trial_indexed(world: &WorldConfig, profile: &NoiseProfile, seed: u64, trial: u64) -> Result<TrialRecord> {
    world.validate()?;
    let mut streams = TrialStreams::new(seed, trial);
    let scene = sample_scene(world, &mut streams.scene)?;
    let frames = gesture_frames(world, &scene, &mut streams.scene);

    let mut obstacles = world.obstacles.clone();
    if let Some(radius_mm) = world.bench_radius_mm {
        obstacles.push(Obstacle::Disc { center: scene.target, radius_mm });
    }

    let model = match world.degraded_localization {
        Some(d) if streams.localization.gen_bool(d.probability) => d.model,
        _ => world.localization,
    };
    let mut localizer = Localizer::new(model);
    let mut believed = scene.robot_start;
    for _ in 0..world.burn_in_steps {
        believed = localizer.update(scene.robot_start, &mut streams.localization);
    }
    let mut state = RobotState { position: scene.robot_start, heading: scene.robot_heading, believed_position: believed };

    let pipeline_config = PipelineConfig { mode: world.mode.command_mode(), ..world.pipeline };
    let mut pipeline = Pipeline::new(pipeline_config, world.camera_to_robot(), world.camera_height_mm)?;
    let mut provider = OracleProvider::with_rng(profile.clone(), streams.perception)?;
    let mut command = None;
    let mut failed = false;
    'frames: for frame in &frames {
        for event in pipeline.step(frame, &mut provider)? {
            match event {
                PipelineEvent::Command(c) => {
                    command = Some(c);
                    break 'frames;
                }
                PipelineEvent::DispatchFailed { .. } => failed = true,
                _ => {}
            }
        }
    }

    let mut record = TrialRecord {
        trial,
        seed,
        mode: world.mode,
        true_target_mm: scene.target,
        commanded_goal_mm: None,
        line_heading_deg: None,
        final_position_mm: scene.robot_start,
        reach_error_mm: scene.robot_start.distance(scene.target),
        success: false,
        distance_to_target_mm: scene.robot_start.distance(scene.target),
        user_distance_mm: scene.robot_start.distance(scene.user),
        outcome: if failed { TrialOutcome::DispatchFailed } else { TrialOutcome::NoCommand },
        path: vec![scene.robot_start],
    };
    let Some(command) = command else {
        return Ok(record);
    };

    // The command is expressed in the robot frame; the robot places it in the
    // world using where it believes it is.
    let to_world = world.robot_to_world(state.believed_position, state.heading);
    let flat = |v: Vec3| Vec2::new(v.x, v.y);
    let mut drive = Drive {
        world,
        obstacles: &obstacles,
        localizer,
        rng: streams.localization,
        state,
        path: vec![scene.robot_start],
        steps: 0,
    };
    let outcome = match command.kind {
        TargetKind::DirectGoal { goal } => {
            let goal = flat(to_world.transform_point(goal));
            record.commanded_goal_mm = Some(goal);
            match drive.leg(goal) {
                Leg::Arrived => TrialOutcome::Arrived,
                Leg::Blocked => TrialOutcome::Blocked,
                Leg::StepLimit => TrialOutcome::StepLimit,
            }
        }
        TargetKind::FloorLine { ray } => {
            let origin = flat(to_world.transform_point(ray.origin));
            let dir = flat(to_world.transform_direction(ray.direction).as_vec());
            let dir = dir * (1.0 / dir.norm());
            record.commanded_goal_mm = Some(origin);
            record.line_heading_deg = Some(dir.angle().to_degrees());
            match drive.leg(origin) {
                Leg::Arrived => match drive.leg(origin + dir * world.line_max_mm) {
                    Leg::Arrived => TrialOutcome::LineEnd,
                    Leg::Blocked => TrialOutcome::Blocked,
                    Leg::StepLimit => TrialOutcome::StepLimit,
                },
                Leg::Blocked => TrialOutcome::Blocked,
                Leg::StepLimit => TrialOutcome::StepLimit,
            }
        }
    };
    state = drive.state;
    record.outcome = outcome;
    record.final_position_mm = state.position;
    record.reach_error_mm = state.position.distance(scene.target);
    record.success = record.reach_error_mm <= world.success_radius_mm;
    record.path = drive.path;
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub world: WorldConfig,
    pub profile: NoiseProfile,
}

impl CampaignConfig {
    pub fn calibrated(mode: RobotMode) -> Self {
        CampaignConfig { world: WorldConfig::for_mode(mode), profile: NoiseProfile::calibrated() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub mode: RobotMode,
    pub master_seed: u64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_reach_error_mm: f64,
    /// Population standard deviation.
    pub std_reach_error_mm: f64,
    pub mean_distance_mm: f64,
    pub std_distance_mm: f64,
    /// Trials where no command was produced.
    pub no_command: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub summary: CampaignSummary,
    pub records: Vec<TrialRecord>,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(mode: RobotMode, master_seed: u64, records: &[TrialRecord]) -> CampaignSummary {
    let successes = records.iter().filter(|r| r.success).count();
    let (mean_err, std_err) = mean_std(records.iter().map(|r| r.reach_error_mm));
    let (mean_d, std_d) = mean_std(records.iter().map(|r| r.distance_to_target_mm));
    CampaignSummary {
        mode,
        master_seed,
        trials: records.len(),
        successes,
        success_rate: successes as f64 / records.len() as f64,
        mean_reach_error_mm: mean_err,
        std_reach_error_mm: std_err,
        mean_distance_mm: mean_d,
        std_distance_mm: std_d,
        no_command: records
            .iter()
            .filter(|r| matches!(r.outcome, TrialOutcome::NoCommand | TrialOutcome::DispatchFailed))
            .count(),
    }
}

/// Runs `n_trials` trials in parallel. Trial `i` uses its own streams of
/// `master_seed`, so results do not depend on scheduling.
pub fn run_campaign(config: &CampaignConfig, n_trials: usize, master_seed: u64) -> Result<CampaignResult> {
    if n_trials == 0 {
        return Err(SimError::Config("a campaign needs at least one trial".into()));
    }
    config.world.validate()?;
    config.profile.validate()?;
    let records = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| run_trial_indexed(&config.world, &config.profile, master_seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(CampaignResult { summary: summarize(config.world.mode, master_seed, &records), records })
}
