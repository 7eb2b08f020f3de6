//! Synthetic comparison of three ways to measure a pointing direction:
//! forearm (elbow to wrist), index finger (finger axis), and eyes-finger
//! (nose root to fingertip).
//!
//! A simulated user looks at a target and places the fingertip on the line of
//! sight, so a noise-free pose makes all three rays pass through the target.
//! Each approach then receives its own angular perturbation:
//!
//! * index finger: the finger axis is tilted off the sight line;
//! * forearm: the forearm is additionally tilted off the finger axis at the wrist;
//! * eyes-finger: the recorded head point is displaced so the head-to-fingertip
//!   ray is tilted off the sight line.
//!
//! Tilts are `N(0, sigma)` angles about a uniformly random perpendicular axis.
//! The shipped sigmas come from [`calibrate`] and are a model, not measured
//! human data.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{pointing_error, GeometryError, RigidTransform, UnitVec3, Vec3};
use crate::metrics::{self, BinStat, ErrorSeries, ErrorUnit, MetricsError};
use crate::sampling::{normal, stream_rng, tilt};

/// Mean errors (mm) the default noise model is fitted to, in FA, IF, EF order.
pub const REFERENCE_MEANS_MM: [f64; 3] = [491.9, 333.3, 157.8];

const MAX_POSE_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("target at {distance_mm:.0} mm cannot be pointed at with the arm model")]
    InfeasibleScenario { distance_mm: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, CompareError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Approach {
    FA,
    IF,
    EF,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::FA, Approach::IF, Approach::EF];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::FA => "FA",
            Approach::IF => "IF",
            Approach::EF => "EF",
        }
    }
}

impl std::fmt::Display for Approach {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Approach {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "FA" => Ok(Approach::FA),
            "IF" => Ok(Approach::IF),
            "EF" => Ok(Approach::EF),
            other => Err(format!("unknown approach `{other}`")),
        }
    }
}

/// Segment lengths (mm) and the shoulder position relative to the nose root in
/// a body frame (`x` toward the target, `y` to the user's left, `z` up).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    pub upper_arm_mm: f64,
    pub forearm_mm: f64,
    pub hand_mm: f64,
    pub shoulder_offset_mm: Vec3,
}

impl Default for ArmModel {
    fn default() -> Self {
        ArmModel {
            upper_arm_mm: 300.0,
            forearm_mm: 280.0,
            hand_mm: 180.0,
            shoulder_offset_mm: Vec3::new(-40.0, -160.0, -200.0),
        }
    }
}

/// Standard deviations (degrees) of the per-approach tilt angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureNoise {
    pub forearm_wrist_deg: f64,
    pub finger_axis_deg: f64,
    pub eye_finger_deg: f64,
}

impl MeasureNoise {
    pub const ZERO: MeasureNoise = MeasureNoise { forearm_wrist_deg: 0.0, finger_axis_deg: 0.0, eye_finger_deg: 0.0 };

    /// Output of [`calibrate`] on [`ScenarioConfig::default`] with seed 0 and
    /// 4000 trials per evaluation (`cargo run --example fit_measure_noise`).
    pub const CALIBRATED: MeasureNoise =
        MeasureNoise { forearm_wrist_deg: 8.7, finger_axis_deg: 9.65, eye_finger_deg: 4.55 };
}

impl Default for MeasureNoise {
    fn default() -> Self {
        MeasureNoise::CALIBRATED
    }
}

/// Body posture; sets the nose-root height.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Posture {
    Standing,
    Sitting,
    Crouching,
}

impl Posture {
    pub fn nose_height_mm(self) -> f64 {
        match self {
            Posture::Standing => 1600.0,
            Posture::Sitting => 1200.0,
            Posture::Crouching => 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Horizontal nose-to-target distance range, mm.
    pub distance_mm: (f64, f64),
    /// Target height above the floor, mm.
    pub target_height_mm: (f64, f64),
    pub postures: Vec<Posture>,
    pub nose_height_jitter_mm: f64,
    pub body_yaw_jitter_deg: f64,
    pub arm: ArmModel,
    pub noise: MeasureNoise,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            distance_mm: (1000.0, 5000.0),
            target_height_mm: (0.0, 1000.0),
            postures: vec![Posture::Standing, Posture::Sitting, Posture::Crouching],
            nose_height_jitter_mm: 50.0,
            body_yaw_jitter_deg: 20.0,
            arm: ArmModel::default(),
            noise: MeasureNoise::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.distance_mm;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(CompareError::Config(format!("distance range ({lo}, {hi}) must be positive and ordered")));
        }
        let (tlo, thi) = self.target_height_mm;
        if !(tlo >= 0.0 && thi >= tlo && thi.is_finite()) {
            return Err(CompareError::Config(format!("target height range ({tlo}, {thi}) invalid")));
        }
        if self.postures.is_empty() {
            return Err(CompareError::Config("at least one posture is required".into()));
        }
        let a = &self.arm;
        if !(a.upper_arm_mm > 0.0 && a.forearm_mm > 0.0 && a.hand_mm > 0.0) {
            return Err(CompareError::Config("arm segment lengths must be positive".into()));
        }
        if a.shoulder_offset_mm.norm() >= a.upper_arm_mm {
            return Err(CompareError::Config("shoulder offset must be shorter than the upper arm".into()));
        }
        let n = &self.noise;
        if [n.forearm_wrist_deg, n.finger_axis_deg, n.eye_finger_deg].iter().any(|s| !(*s >= 0.0)) {
            return Err(CompareError::Config("noise sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// Marker positions (mm, world frame, `z` up from the floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
    pub fingertip: Vec3,
    pub nose_root: Vec3,
    pub intended_target: Vec3,
    /// Horizontal distance from the user's actual nose root to the target.
    pub user_distance_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub approach: Approach,
    pub key_point: Vec3,
    pub direction: Vec3,
    pub target: Vec3,
    pub user_distance_mm: f64,
}

impl MeasurementSample {
    pub fn error_mm(&self) -> Result<f64> {
        Ok(pointing_error(self.target, self.key_point, self.direction)?)
    }
}

/// Samples one pose. The RNG is consumed the same way whatever the noise
/// level, so changing a sigma does not reshuffle the geometry.
pub fn generate_arm_pose<R: Rng + ?Sized>(rng: &mut R, scenario: &ScenarioConfig) -> Result<ArmPose> {
    let (dlo, dhi) = scenario.distance_mm;
    let distance = if dhi > dlo { rng.gen_range(dlo..dhi) } else { dlo };
    let (tlo, thi) = scenario.target_height_mm;
    let target_height = if thi > tlo { rng.gen_range(tlo..thi) } else { tlo };
    let posture = scenario.postures[rng.gen_range(0..scenario.postures.len())];
    let nose_height = posture.nose_height_mm() + normal(rng, scenario.nose_height_jitter_mm);
    let azimuth: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let body_jitter = normal(rng, scenario.body_yaw_jitter_deg.to_radians()).clamp(-0.8, 0.8);
    let noise_draws: [f64; 3] = [normal(rng, 1.0), normal(rng, 1.0), normal(rng, 1.0)];

    let nose_root = Vec3::new(0.0, 0.0, nose_height);
    let intended_target = Vec3::new(distance * azimuth.cos(), distance * azimuth.sin(), target_height);
    let body = RigidTransform::rotation_z(azimuth + body_jitter);
    let arm = &scenario.arm;
    let shoulder = nose_root + body.rotate(arm.shoulder_offset_mm);

    // Sight line from the nose root through the target. The arm is straight
    // along it from the elbow out, and the elbow sits one upper-arm length
    // from the shoulder.
    let sight = UnitVec3::new_normalize(intended_target - nose_root)?;
    let w = nose_root - shoulder;
    let wu = w.dot(sight.as_vec());
    let disc = wu * wu - w.dot(w) + arm.upper_arm_mm * arm.upper_arm_mm;
    let to_target = (intended_target - nose_root).norm();
    let elbow_along = -wu + disc.max(0.0).sqrt();
    let reach = elbow_along + arm.forearm_mm + arm.hand_mm;
    if disc < 0.0 || elbow_along <= 0.0 || reach >= to_target {
        return Err(CompareError::InfeasibleScenario { distance_mm: distance });
    }
    let fingertip = nose_root + sight.as_vec() * reach;

    let n = &scenario.noise;
    let finger_dir = tilt(rng, sight, n.finger_axis_deg.to_radians() * noise_draws[0]);
    let wrist = fingertip - finger_dir.as_vec() * arm.hand_mm;
    let forearm_dir = tilt(rng, finger_dir, n.forearm_wrist_deg.to_radians() * noise_draws[1]);
    let elbow = wrist - forearm_dir.as_vec() * arm.forearm_mm;
    let head_dir = tilt(rng, sight, n.eye_finger_deg.to_radians() * noise_draws[2]);
    let nose_recorded = fingertip - head_dir.as_vec() * reach;

    Ok(ArmPose { shoulder, elbow, wrist, fingertip, nose_root: nose_recorded, intended_target, user_distance_mm: distance })
}

/// Key-point and direction for one approach.
pub fn extract_measurement(pose: &ArmPose, approach: Approach) -> MeasurementSample {
    let (key_point, direction) = match approach {
        Approach::FA => (pose.wrist, pose.wrist - pose.elbow),
        Approach::IF => (pose.fingertip, pose.fingertip - pose.wrist),
        Approach::EF => (pose.fingertip, pose.fingertip - pose.nose_root),
    };
    MeasurementSample {
        approach,
        key_point,
        direction,
        target: pose.intended_target,
        user_distance_mm: pose.user_distance_mm,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub scenario: ScenarioConfig,
    pub trials: usize,
    pub seed: u64,
    pub bin_mm: f64,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig { scenario: ScenarioConfig::default(), trials: 10_000, seed: 0, bin_mm: 500.0 }
    }
}

/// One row of the per-trial output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachErrorRow {
    pub approach: Approach,
    pub distance_mm: f64,
    pub error_mm: f64,
    pub trial_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachStats {
    pub approach: Approach,
    pub mean_error_mm: f64,
    pub std_error_mm: f64,
    pub n_trials: usize,
    pub distance_bins: Vec<BinStat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub stats: Vec<ApproachStats>,
    pub rows: Vec<ApproachErrorRow>,
}

impl ComparisonReport {
    pub fn stats_for(&self, approach: Approach) -> Option<&ApproachStats> {
        self.stats.iter().find(|s| s.approach == approach)
    }
}

fn sample_pose(config: &ComparisonConfig, trial: usize) -> Result<ArmPose> {
    let mut rng = stream_rng(config.seed, trial as u64);
    let mut last = None;
    for _ in 0..MAX_POSE_ATTEMPTS {
        match generate_arm_pose(&mut rng, &config.scenario) {
            Ok(p) => return Ok(p),
            Err(e @ CompareError::InfeasibleScenario { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Runs all trials and aggregates per-approach statistics.
pub fn run_comparison(config: &ComparisonConfig) -> Result<ComparisonReport> {
    if config.trials == 0 {
        return Err(CompareError::Config("trial count must be at least 1".into()));
    }
    if !(config.bin_mm > 0.0) {
        return Err(CompareError::Config("bin width must be positive".into()));
    }
    config.scenario.validate()?;

    let per_trial: Vec<Vec<ApproachErrorRow>> = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let pose = sample_pose(config, trial)?;
            Approach::ALL
                .iter()
                .map(|&a| {
                    let s = extract_measurement(&pose, a);
                    Ok(ApproachErrorRow { approach: a, distance_mm: s.user_distance_mm, error_mm: s.error_mm()?, trial_id: trial })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ApproachErrorRow> = per_trial.into_iter().flatten().collect();

    let mut stats = Vec::new();
    for approach in Approach::ALL {
        let pairs: Vec<(f64, f64)> =
            rows.iter().filter(|r| r.approach == approach).map(|r| (r.distance_mm, r.error_mm)).collect();
        let n = pairs.len() as f64;
        let mean = pairs.iter().map(|p| p.1).sum::<f64>() / n;
        let std = (pairs.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / n).sqrt();
        let series = ErrorSeries::new(pairs, ErrorUnit::Millimeters)?;
        stats.push(ApproachStats {
            approach,
            mean_error_mm: mean,
            std_error_mm: std,
            n_trials: series.len(),
            distance_bins: metrics::bin_by_distance(&series, config.bin_mm)?,
        });
    }
    Ok(ComparisonReport { stats, rows })
}

fn mean_errors(config: &ComparisonConfig) -> Result<[f64; 3]> {
    let report = run_comparison(config)?;
    Ok(Approach::ALL.map(|a| report.stats_for(a).map_or(f64::NAN, |s| s.mean_error_mm)))
}

/// Fits one sigma by a coarse grid then a fine grid around the best coarse
/// point, minimizing `|mean(approach) - target|` under common random numbers.
fn fit_sigma(
    base: &ComparisonConfig,
    approach: Approach,
    target: f64,
    set: impl Fn(&mut MeasureNoise, f64),
) -> Result<f64> {
    let index = Approach::ALL.iter().position(|a| *a == approach).expect("known approach");
    let eval = |sigma: f64| -> Result<f64> {
        let mut cfg = base.clone();
        set(&mut cfg.scenario.noise, sigma);
        Ok((mean_errors(&cfg)?[index] - target).abs())
    };
    let mut best = (f64::INFINITY, 0.0);
    for k in 1..=40 {
        let s = 0.5 * k as f64;
        let r = eval(s)?;
        if r < best.0 {
            best = (r, s);
        }
    }
    let centre = best.1;
    for k in -10..=10 {
        let s = centre + 0.05 * k as f64;
        if s <= 0.0 {
            continue;
        }
        let r = eval(s)?;
        if r < best.0 {
            best = (r, s);
        }
    }
    Ok((best.1 * 100.0).round() / 100.0)
}

/// Grid-search fit of the three noise sigmas to target mean errors
/// (FA, IF, EF order, mm). The forearm ray inherits the finger tilt, so the
/// finger sigma is fitted before the wrist sigma.
pub fn calibrate(base: &ComparisonConfig, targets_mm: [f64; 3]) -> Result<MeasureNoise> {
    let mut cfg = base.clone();
    cfg.scenario.noise = MeasureNoise::ZERO;
    let finger = fit_sigma(&cfg, Approach::IF, targets_mm[1], |n, s| n.finger_axis_deg = s)?;
    let eye = fit_sigma(&cfg, Approach::EF, targets_mm[2], |n, s| n.eye_finger_deg = s)?;
    cfg.scenario.noise.finger_axis_deg = finger;
    let wrist = fit_sigma(&cfg, Approach::FA, targets_mm[0], |n, s| n.forearm_wrist_deg = s)?;
    Ok(MeasureNoise { forearm_wrist_deg: wrist, finger_axis_deg: finger, eye_finger_deg: eye })
}
