//! Recognition-triggered dispatch: idle until the recognizer fires `k` times
//! in a row, collect estimates for a settle window while the arm comes to
//! rest, fuse them, map the result into the robot frame and resolve a goal.
//!
//! ```text
//!   Idle --k qualifying frames--> Settling(N) --N frames--> Dispatched --cooldown--> Idle
//!                                     |
//!                                     +--no usable estimate / no floor hit--> Idle
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    direction_from_angles, project_to_floor_line, resolve_target, wrap_rad, GeometryError, PointingFeature, Ray,
    RigidTransform, Vec3,
};
use crate::perception::{DebounceConfig, Debouncer, FeatureRecord, Frame, PerceptionError, PerceptionProvider, TriggerDecision};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("frame timestamp {got} does not follow {prev}")]
    NonMonotonicTimestamp { prev: f64, got: f64 },
    #[error("no estimates to fuse")]
    EmptyEstimates,
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// How a resolved pointing ray becomes a motion goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandMode {
    /// Walk straight to the floor point hit by the ray.
    DirectGoal,
    /// Follow the ray's floor projection until blocked (pitch is ignored).
    FloorLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub debounce: DebounceConfig,
    /// Estimates collected after the trigger before fusing.
    pub settle_frames: usize,
    /// Frame time (s) after a dispatch before the pipeline re-arms.
    pub cooldown_s: f64,
    pub mode: CommandMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            debounce: DebounceConfig::default(),
            settle_frames: 5,
            cooldown_s: 2.0,
            mode: CommandMode::DirectGoal,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.debounce.k == 0 {
            return Err(PipelineError::Config("debounce k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.debounce.certainty_threshold) {
            return Err(PipelineError::Config("certainty threshold must lie in [0, 1]".into()));
        }
        if self.settle_frames == 0 {
            return Err(PipelineError::Config("settle window must be at least 1 frame".into()));
        }
        if !(self.cooldown_s >= 0.0) {
            return Err(PipelineError::Config("cooldown must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Phase {
    Idle,
    Settling { frames_remaining: usize },
    Dispatched { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    DirectGoal { goal: Vec3 },
    FloorLine { ray: Ray },
}

/// A goal in robot-frame coordinates plus what produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCommand {
    pub kind: TargetKind,
    pub source: PointingFeature,
    pub camera_to_robot: RigidTransform,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchFailure {
    NoUsableEstimates,
    Geometry(GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PipelineEvent {
    Triggered { at: f64 },
    /// A settle-window frame produced no usable estimate.
    DroppedFrame { at: f64 },
    Command(TargetCommand),
    DispatchFailed { at: f64, reason: DispatchFailure },
    Rearmed { at: f64 },
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of angles (radians) on the circle: angles are unwrapped around
/// their circular mean, the linear median is taken and the result wrapped.
fn circular_median(angles: &[f64]) -> f64 {
    let (s, c) = angles.iter().fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    let reference = if s.hypot(c) > 1e-12 { s.atan2(c) } else { angles[0] };
    let mut unwrapped: Vec<f64> = angles.iter().map(|a| reference + wrap_rad(a - reference)).collect();
    wrap_rad(median(&mut unwrapped))
}

/// Component-wise median of positions and pitch, circular median of yaw.
pub fn settle_and_fuse(estimates: &[PointingFeature]) -> Result<PointingFeature> {
    if estimates.is_empty() {
        return Err(PipelineError::EmptyEstimates);
    }
    let col = |f: fn(&PointingFeature) -> f64| median(&mut estimates.iter().map(f).collect::<Vec<_>>());
    let position = Vec3::new(col(|e| e.position().x), col(|e| e.position().y), col(|e| e.position().z));
    let pitch = col(PointingFeature::pitch);
    let yaw = circular_median(&estimates.iter().map(PointingFeature::yaw).collect::<Vec<_>>());
    Ok(PointingFeature::new(position, pitch, yaw)?)
}

/// Maps a camera-frame feature into the robot frame and resolves a goal.
pub fn dispatch_target(
    feature: &PointingFeature,
    camera_to_robot: &RigidTransform,
    height_mm: f64,
    mode: CommandMode,
) -> std::result::Result<TargetKind, GeometryError> {
    let dir_c = direction_from_angles(feature.pitch(), feature.yaw())?;
    let finger_r = camera_to_robot.transform_point(feature.position());
    let dir_r = camera_to_robot.transform_direction(dir_c);
    match mode {
        CommandMode::DirectGoal => Ok(TargetKind::DirectGoal { goal: resolve_target(finger_r, dir_r, height_mm)? }),
        CommandMode::FloorLine => Ok(TargetKind::FloorLine { ray: project_to_floor_line(finger_r, dir_r, height_mm)? }),
    }
}

/// Single-owner state machine consuming frames in timestamp order.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    camera_to_robot: RigidTransform,
    height_mm: f64,
    phase: Phase,
    debouncer: Debouncer,
    estimates: Vec<PointingFeature>,
    last_timestamp: Option<f64>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, camera_to_robot: RigidTransform, height_mm: f64) -> Result<Self> {
        config.validate()?;
        if !(height_mm > 0.0) || !height_mm.is_finite() {
            return Err(PipelineError::Config(format!("robot height {height_mm} mm must be positive")));
        }
        Ok(Pipeline {
            config,
            camera_to_robot,
            height_mm,
            phase: Phase::Idle,
            debouncer: Debouncer::new(config.debounce),
            estimates: Vec::new(),
            last_timestamp: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn estimates(&self) -> &[PointingFeature] {
        &self.estimates
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn go_idle(&mut self) {
        self.phase = Phase::Idle;
        self.estimates.clear();
        self.debouncer.reset();
    }

    /// Consumes one frame. Provider failures while idle are returned as
    /// errors with the state unchanged; failures while settling drop the frame.
    pub fn step<P: PerceptionProvider + ?Sized>(&mut self, frame: &Frame, provider: &mut P) -> Result<Vec<PipelineEvent>> {
        if let Some(prev) = self.last_timestamp {
            if !(frame.timestamp > prev) {
                return Err(PipelineError::NonMonotonicTimestamp { prev, got: frame.timestamp });
            }
        }
        let t = frame.timestamp;
        let mut events = Vec::new();

        if let Phase::Dispatched { at } = self.phase {
            if t - at < self.config.cooldown_s {
                self.last_timestamp = Some(t);
                return Ok(events);
            }
            self.go_idle();
            events.push(PipelineEvent::Rearmed { at: t });
        }

        match self.phase {
            Phase::Idle => {
                let c = provider.classify(frame)?;
                if self.debouncer.update(&c) == TriggerDecision::Fire {
                    self.phase = Phase::Settling { frames_remaining: self.config.settle_frames };
                    events.push(PipelineEvent::Triggered { at: t });
                }
            }
            Phase::Settling { frames_remaining } => {
                match provider.estimate(frame) {
                    Ok(e) if !e.yaw_out_of_range => self.estimates.push(e.feature),
                    _ => events.push(PipelineEvent::DroppedFrame { at: t }),
                }
                let remaining = frames_remaining - 1;
                if remaining > 0 {
                    self.phase = Phase::Settling { frames_remaining: remaining };
                } else {
                    events.push(self.finish_settling(t));
                }
            }
            Phase::Dispatched { .. } => unreachable!("handled above"),
        }
        self.last_timestamp = Some(t);
        Ok(events)
    }

    fn finish_settling(&mut self, t: f64) -> PipelineEvent {
        let Ok(fused) = settle_and_fuse(&self.estimates) else {
            self.go_idle();
            return PipelineEvent::DispatchFailed { at: t, reason: DispatchFailure::NoUsableEstimates };
        };
        match dispatch_target(&fused, &self.camera_to_robot, self.height_mm, self.config.mode) {
            Ok(kind) => {
                self.phase = Phase::Dispatched { at: t };
                PipelineEvent::Command(TargetCommand {
                    kind,
                    source: fused,
                    camera_to_robot: self.camera_to_robot,
                    timestamp: t,
                })
            }
            Err(e) => {
                self.go_idle();
                PipelineEvent::DispatchFailed { at: t, reason: DispatchFailure::Geometry(e) }
            }
        }
    }
}

pub fn pipeline_step<P: PerceptionProvider + ?Sized>(
    state: &mut Pipeline,
    frame: &Frame,
    provider: &mut P,
) -> Result<Vec<PipelineEvent>> {
    state.step(frame, provider)
}

/// JSON Lines form of a [`TargetCommand`]. Lengths mm, angles degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCommandRecord {
    pub t: f64,
    pub mode: CommandMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_mm: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_origin_mm: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_dir: Option<[f64; 3]>,
    pub source: FeatureRecord,
}

impl From<&TargetCommand> for TargetCommandRecord {
    fn from(c: &TargetCommand) -> Self {
        let (mode, goal_mm, line_origin_mm, line_dir) = match c.kind {
            TargetKind::DirectGoal { goal } => (CommandMode::DirectGoal, Some(goal.to_array()), None, None),
            TargetKind::FloorLine { ray } => {
                (CommandMode::FloorLine, None, Some(ray.origin.to_array()), Some(ray.direction.as_vec().to_array()))
            }
        };
        TargetCommandRecord { t: c.timestamp, mode, goal_mm, line_origin_mm, line_dir, source: FeatureRecord::from(&c.source) }
    }
}
