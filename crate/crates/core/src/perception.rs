//! Perception stand-ins for the pointing recognizer and the pointing estimator.
//!
//! A [`PerceptionProvider`] answers two questions about a [`Frame`]: is the
//! user pointing ([`PerceptionProvider::classify`]) and where and in which
//! direction ([`PerceptionProvider::estimate`]). Two providers ship:
//!
//! * [`OracleProvider`] perturbs the frame's ground truth with a
//!   [`NoiseProfile`] calibrated to published recognizer/estimator accuracy.
//! * [`ReplayProvider`] returns what a recorded session log says.
//!
//! The module also holds the debounce rule that turns a stream of
//! classifications into a trigger, and the JSON Lines session-log format.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_deg, GeometryError, PointingFeature, Vec3};
use crate::sampling::{normal, normal_vec, sigma_for_folded_mean, sigma_for_rms_norm, stream_rng};

/// Largest |yaw| (degrees) the estimator supports.
pub const MAX_SUPPORTED_YAW_DEG: f64 = 125.0;
/// Estimated pitch is clamped to this magnitude (degrees).
pub const MAX_ESTIMATED_PITCH_DEG: f64 = 89.9;

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("frame at t={timestamp} has no ground truth")]
    MissingGroundTruth { timestamp: f64 },
    #[error("replay stream exhausted")]
    Exhausted,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("replay record for t={record} does not match frame t={frame}")]
    FrameMismatch { record: f64, frame: f64 },
    #[error("invalid noise profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PerceptionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioTag {
    Nominal,
    Gloves,
    OutOfFrame,
    Occlusion,
    MultiUser,
    Sitting,
    DualArm,
}

impl ScenarioTag {
    pub const ALL: [ScenarioTag; 7] = [
        ScenarioTag::Nominal,
        ScenarioTag::Gloves,
        ScenarioTag::OutOfFrame,
        ScenarioTag::Occlusion,
        ScenarioTag::MultiUser,
        ScenarioTag::Sitting,
        ScenarioTag::DualArm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioTag::Nominal => "nominal",
            ScenarioTag::Gloves => "gloves",
            ScenarioTag::OutOfFrame => "out_of_frame",
            ScenarioTag::Occlusion => "occlusion",
            ScenarioTag::MultiUser => "multi_user",
            ScenarioTag::Sitting => "sitting",
            ScenarioTag::DualArm => "dual_arm",
        }
    }
}

impl std::str::FromStr for ScenarioTag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ScenarioTag::ALL
            .into_iter()
            .find(|t| t.as_str() == norm)
            .ok_or_else(|| format!("unknown scenario tag `{s}`"))
    }
}

impl std::fmt::Display for ScenarioTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruth {
    pub is_pointing: bool,
    /// Present whenever an arm pose is defined, including arm-down frames.
    pub feature: Option<PointingFeature>,
}

/// One camera observation, reduced to what the providers need.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Seconds.
    pub timestamp: f64,
    pub ground_truth: Option<GroundTruth>,
    pub tags: BTreeSet<ScenarioTag>,
}

impl Frame {
    pub fn new(timestamp: f64, ground_truth: Option<GroundTruth>) -> Self {
        Frame { timestamp, ground_truth, tags: BTreeSet::new() }
    }

    pub fn with_tag(mut self, tag: ScenarioTag) -> Self {
        self.tags.insert(tag);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    #[serde(rename = "pointing")]
    pub is_pointing: bool,
    /// Confidence in `is_pointing`, in `[0, 1]`.
    pub certainty: f64,
}

/// Estimator output. `yaw_out_of_range` is set when |yaw| exceeds
/// [`MAX_SUPPORTED_YAW_DEG`]; such estimates should not be acted on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub feature: PointingFeature,
    pub yaw_out_of_range: bool,
}

impl Estimate {
    pub fn new(feature: PointingFeature) -> Self {
        Estimate { feature, yaw_out_of_range: feature.yaw_deg().abs() > MAX_SUPPORTED_YAW_DEG }
    }
}

/// Accuracy figures for one scenario. Position is an RMSE in mm, angles are
/// MAEs in degrees; the `*_std` spreads are carried for reporting only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagNoise {
    pub classify_success_rate: f64,
    pub pos_rmse_mm: f64,
    pub pos_std_mm: f64,
    pub yaw_mae_deg: f64,
    pub yaw_std_deg: f64,
    pub pitch_mae_deg: f64,
    pub pitch_std_deg: f64,
}

impl TagNoise {
    pub const PERFECT: TagNoise = TagNoise {
        classify_success_rate: 1.0,
        pos_rmse_mm: 0.0,
        pos_std_mm: 0.0,
        yaw_mae_deg: 0.0,
        yaw_std_deg: 0.0,
        pitch_mae_deg: 0.0,
        pitch_std_deg: 0.0,
    };

    const fn table(rate_pct: f64, pos: (f64, f64), pitch: (f64, f64), yaw: (f64, f64)) -> TagNoise {
        TagNoise {
            classify_success_rate: rate_pct / 100.0,
            pos_rmse_mm: pos.0,
            pos_std_mm: pos.1,
            yaw_mae_deg: yaw.0,
            yaw_std_deg: yaw.1,
            pitch_mae_deg: pitch.0,
            pitch_std_deg: pitch.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub certainty_correct_mean: f64,
    pub certainty_incorrect_mean: f64,
    /// Beta concentration `a + b`; zero or less makes certainty deterministic.
    pub certainty_concentration: f64,
    pub per_tag: BTreeMap<ScenarioTag, TagNoise>,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile::calibrated()
    }
}

impl NoiseProfile {
    /// Nominal accuracy of the segmentation-backed recognizer and the full
    /// image+mask+depth estimator, plus the six edge-case rows.
    pub fn calibrated() -> Self {
        use ScenarioTag::*;
        let per_tag = BTreeMap::from([
            (Nominal, TagNoise::table(97.2, (61.3, 30.0), (0.61, 0.63), (1.4, 1.3))),
            (Gloves, TagNoise::table(94.9, (81.3, 44.0), (10.89, 6.9), (11.02, 3.2))),
            (OutOfFrame, TagNoise::table(95.5, (75.5, 35.8), (10.22, 3.7), (12.44, 6.1))),
            (Occlusion, TagNoise::table(89.5, (70.9, 29.6), (11.75, 5.9), (12.86, 3.7))),
            (MultiUser, TagNoise::table(90.5, (72.3, 34.1), (6.57, 2.98), (7.43, 4.54))),
            (Sitting, TagNoise::table(97.9, (68.8, 35.6), (3.87, 1.88), (5.08, 2.12))),
            (DualArm, TagNoise::table(87.8, (70.1, 38.8), (7.45, 2.61), (8.03, 2.94))),
        ]);
        NoiseProfile {
            certainty_correct_mean: 0.95,
            certainty_incorrect_mean: 0.35,
            certainty_concentration: 20.0,
            per_tag,
        }
    }

    /// Perfect recognizer and estimator with fixed certainty.
    pub fn zero() -> Self {
        NoiseProfile {
            certainty_correct_mean: 0.95,
            certainty_incorrect_mean: 0.35,
            certainty_concentration: 0.0,
            per_tag: ScenarioTag::ALL.into_iter().map(|t| (t, TagNoise::PERFECT)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in [self.certainty_correct_mean, self.certainty_incorrect_mean] {
            if !(m > 0.0 && m < 1.0) {
                return Err(PerceptionError::Profile(format!("certainty mean {m} must lie in (0, 1)")));
            }
        }
        if !self.per_tag.contains_key(&ScenarioTag::Nominal) {
            return Err(PerceptionError::Profile("missing nominal entry".into()));
        }
        for (tag, n) in &self.per_tag {
            if !(0.0..=1.0).contains(&n.classify_success_rate) {
                return Err(PerceptionError::Profile(format!("{tag}: success rate outside [0, 1]")));
            }
            let mags = [n.pos_rmse_mm, n.pos_std_mm, n.yaw_mae_deg, n.yaw_std_deg, n.pitch_mae_deg, n.pitch_std_deg];
            if mags.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
                return Err(PerceptionError::Profile(format!("{tag}: error magnitudes must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Noise that applies to a frame: the hardest (lowest success rate)
    /// non-nominal tag present, else the nominal entry.
    pub fn for_tags(&self, tags: &BTreeSet<ScenarioTag>) -> &TagNoise {
        let nominal = &self.per_tag[&ScenarioTag::Nominal];
        tags.iter()
            .filter(|t| **t != ScenarioTag::Nominal)
            .filter_map(|t| self.per_tag.get(t))
            .min_by(|a, b| a.classify_success_rate.total_cmp(&b.classify_success_rate))
            .unwrap_or(nominal)
    }
}

pub trait PerceptionProvider {
    fn classify(&mut self, frame: &Frame) -> Result<Classification>;
    fn estimate(&mut self, frame: &Frame) -> Result<Estimate>;
}

/// Ground truth plus calibrated noise. One instance serves one frame stream.
#[derive(Debug, Clone)]
pub struct OracleProvider {
    profile: NoiseProfile,
    rng: ChaCha8Rng,
}

impl OracleProvider {
    pub fn new(profile: NoiseProfile, seed: u64) -> Result<Self> {
        Self::with_rng(profile, stream_rng(seed, 0))
    }

    pub fn with_rng(profile: NoiseProfile, rng: ChaCha8Rng) -> Result<Self> {
        profile.validate()?;
        Ok(OracleProvider { profile, rng })
    }

    pub fn profile(&self) -> &NoiseProfile {
        &self.profile
    }

    fn certainty(&mut self, mean: f64) -> f64 {
        let k = self.profile.certainty_concentration;
        if !(k > 0.0) {
            return mean;
        }
        Beta::new(mean * k, (1.0 - mean) * k).map_or(mean, |b| b.sample(&mut self.rng))
    }
}

impl PerceptionProvider for OracleProvider {
    fn classify(&mut self, frame: &Frame) -> Result<Classification> {
        let gt = frame.ground_truth.ok_or(PerceptionError::MissingGroundTruth { timestamp: frame.timestamp })?;
        // The recognizer was never shown pointing outside the supported yaw range.
        let truth = gt.is_pointing
            && gt.feature.is_some_and(|f| f.yaw_deg().abs() <= MAX_SUPPORTED_YAW_DEG);
        let rate = self.profile.for_tags(&frame.tags).classify_success_rate;
        let correct = self.rng.gen_bool(rate);
        let mean = if correct { self.profile.certainty_correct_mean } else { self.profile.certainty_incorrect_mean };
        let certainty = self.certainty(mean);
        Ok(Classification { is_pointing: truth == correct, certainty })
    }

    fn estimate(&mut self, frame: &Frame) -> Result<Estimate> {
        let feature = frame
            .ground_truth
            .and_then(|g| g.feature)
            .ok_or(PerceptionError::MissingGroundTruth { timestamp: frame.timestamp })?;
        let n = *self.profile.for_tags(&frame.tags);
        let yaw = wrap_deg(feature.yaw_deg() + normal(&mut self.rng, sigma_for_folded_mean(n.yaw_mae_deg)));
        let pitch = (feature.pitch_deg() + normal(&mut self.rng, sigma_for_folded_mean(n.pitch_mae_deg)))
            .clamp(-MAX_ESTIMATED_PITCH_DEG, MAX_ESTIMATED_PITCH_DEG);
        let position = feature.position() + normal_vec(&mut self.rng, sigma_for_rms_norm(n.pos_rmse_mm));
        Ok(Estimate::new(PointingFeature::from_degrees(position, pitch, yaw)?))
    }
}

/// Trigger rule: `k` consecutive positive classifications at or above a
/// certainty threshold. Any other classification resets the streak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DebounceConfig {
    pub k: usize,
    pub certainty_threshold: f64,
}

impl Default for DebounceConfig {
    fn default() -> Self {
        DebounceConfig { k: 3, certainty_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TriggerDecision {
    Idle,
    Arming { streak: usize },
    Fire,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Debouncer {
    config: DebounceConfig,
    streak: usize,
}

impl Debouncer {
    pub fn new(config: DebounceConfig) -> Self {
        Debouncer { config: DebounceConfig { k: config.k.max(1), ..config }, streak: 0 }
    }

    pub fn streak(&self) -> usize {
        self.streak
    }

    pub fn reset(&mut self) {
        self.streak = 0;
    }

    pub fn update(&mut self, c: &Classification) -> TriggerDecision {
        if !(c.is_pointing && c.certainty >= self.config.certainty_threshold) {
            self.streak = 0;
            return TriggerDecision::Idle;
        }
        self.streak += 1;
        if self.streak >= self.config.k {
            self.streak = 0;
            TriggerDecision::Fire
        } else {
            TriggerDecision::Arming { streak: self.streak }
        }
    }
}

pub fn debounce_update(state: &mut Debouncer, c: &Classification) -> TriggerDecision {
    state.update(c)
}

/// Finger position (mm) and direction angles (degrees) as stored in logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub p_mm: [f64; 3],
    pub beta_deg: f64,
    pub gamma_deg: f64,
}

impl FeatureRecord {
    pub fn to_feature(self) -> Result<PointingFeature> {
        Ok(PointingFeature::from_degrees(Vec3::from_array(self.p_mm), self.beta_deg, self.gamma_deg)?)
    }
}

impl From<&PointingFeature> for FeatureRecord {
    fn from(f: &PointingFeature) -> Self {
        FeatureRecord { p_mm: f.position().to_array(), beta_deg: f.pitch_deg(), gamma_deg: f.yaw_deg() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub pointing: bool,
    #[serde(flatten)]
    pub feature: Option<FeatureRecord>,
}

/// One line of a session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub t: f64,
    #[serde(default)]
    pub tags: Vec<ScenarioTag>,
    #[serde(default)]
    pub gt: Option<GroundTruthRecord>,
    pub cls: Classification,
    #[serde(default)]
    pub est: Option<FeatureRecord>,
}

impl ReplayRecord {
    pub fn to_frame(&self) -> Result<Frame> {
        let ground_truth = match self.gt {
            Some(g) => Some(GroundTruth { is_pointing: g.pointing, feature: g.feature.map(|f| f.to_feature()).transpose()? }),
            None => None,
        };
        Ok(Frame { timestamp: self.t, ground_truth, tags: self.tags.iter().copied().collect() })
    }
}

/// Sequential reader over a JSON Lines session log. Blank lines are skipped.
pub struct ReplayReader<R> {
    inner: R,
    line: usize,
    buf: String,
}

impl<R: BufRead> ReplayReader<R> {
    pub fn new(inner: R) -> Self {
        ReplayReader { inner, line: 0, buf: String::new() }
    }

    /// Line number of the last record returned.
    pub fn line(&self) -> usize {
        self.line
    }

    pub fn replay_next(&mut self) -> Result<ReplayRecord> {
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Err(PerceptionError::Exhausted);
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(text)
                .map_err(|e| PerceptionError::Parse { line: self.line, message: e.to_string() })?;
            if !(0.0..=1.0).contains(&rec.cls.certainty) {
                return Err(PerceptionError::Parse { line: self.line, message: "certainty outside [0, 1]".into() });
            }
            if let Some(est) = rec.est {
                est.to_feature().map_err(|e| PerceptionError::Parse { line: self.line, message: e.to_string() })?;
            }
            return Ok(rec);
        }
    }
}

impl<R: BufRead> Iterator for ReplayReader<R> {
    type Item = Result<ReplayRecord>;
    fn next(&mut self) -> Option<Self::Item> {
        match self.replay_next() {
            Err(PerceptionError::Exhausted) => None,
            other => Some(other),
        }
    }
}

pub fn write_replay_record<W: Write>(w: &mut W, rec: &ReplayRecord) -> Result<()> {
    serde_json::to_writer(&mut *w, rec).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Serves logged outputs. Load each record with [`ReplayProvider::load`]
/// before handing the matching frame to the pipeline.
#[derive(Debug, Clone, Default)]
pub struct ReplayProvider {
    current: Option<ReplayRecord>,
}

impl ReplayProvider {
    pub fn new() -> Self {
        Self::default()
    }

    /// Makes `rec` current and returns its frame.
    pub fn load(&mut self, rec: ReplayRecord) -> Result<Frame> {
        let frame = rec.to_frame()?;
        self.current = Some(rec);
        Ok(frame)
    }

    fn record_for(&self, frame: &Frame) -> Result<&ReplayRecord> {
        let rec = self.current.as_ref().ok_or(PerceptionError::Exhausted)?;
        if rec.t != frame.timestamp {
            return Err(PerceptionError::FrameMismatch { record: rec.t, frame: frame.timestamp });
        }
        Ok(rec)
    }
}

impl PerceptionProvider for ReplayProvider {
    fn classify(&mut self, frame: &Frame) -> Result<Classification> {
        Ok(self.record_for(frame)?.cls)
    }

    fn estimate(&mut self, frame: &Frame) -> Result<Estimate> {
        let est = self.record_for(frame)?.est.ok_or(PerceptionError::Exhausted)?;
        Ok(Estimate::new(est.to_feature()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn pointing_frame(t: f64, yaw_deg: f64) -> Frame {
        let f = PointingFeature::from_degrees(Vec3::new(2500.0, 300.0, 200.0), 20.0, yaw_deg).unwrap();
        Frame::new(t, Some(GroundTruth { is_pointing: true, feature: Some(f) }))
    }

    fn cls(p: bool, c: f64) -> Classification {
        Classification { is_pointing: p, certainty: c }
    }

    #[test]
    fn perfect_rate_matches_truth() {
        let mut p = OracleProvider::new(NoiseProfile::zero(), 1).unwrap();
        for i in 0..200 {
            let f = if i % 3 == 0 {
                Frame::new(i as f64, Some(GroundTruth { is_pointing: false, feature: None }))
            } else {
                pointing_frame(i as f64, 30.0)
            };
            let c = p.classify(&f).unwrap();
            assert_eq!(c.is_pointing, i % 3 != 0);
            assert_eq!(c.certainty, 0.95);
        }
    }

    #[test]
    fn out_of_range_yaw_is_not_pointing() {
        let mut p = OracleProvider::new(NoiseProfile::zero(), 1).unwrap();
        assert!(!p.classify(&pointing_frame(0.0, 150.0)).unwrap().is_pointing);
        assert!(p.classify(&pointing_frame(1.0, 120.0)).unwrap().is_pointing);
    }

    #[test]
    fn missing_ground_truth_errors() {
        let mut p = OracleProvider::new(NoiseProfile::calibrated(), 1).unwrap();
        let f = Frame::new(0.0, None);
        assert!(matches!(p.classify(&f), Err(PerceptionError::MissingGroundTruth { .. })));
        assert!(matches!(p.estimate(&f), Err(PerceptionError::MissingGroundTruth { .. })));
    }

    #[test]
    fn zero_noise_estimate_is_identity() {
        let mut p = OracleProvider::new(NoiseProfile::zero(), 9).unwrap();
        let f = pointing_frame(0.0, -40.0);
        let e = p.estimate(&f).unwrap();
        let gt = f.ground_truth.unwrap().feature.unwrap();
        assert!(e.feature.position().distance(gt.position()) < 1e-12);
        assert!((e.feature.yaw_deg() - gt.yaw_deg()).abs() < 1e-12);
        assert!((e.feature.pitch_deg() - gt.pitch_deg()).abs() < 1e-12);
        assert!(!e.yaw_out_of_range);
    }

    fn run_estimates(tag: ScenarioTag, n: usize, seed: u64) -> (f64, f64, f64) {
        let mut p = OracleProvider::new(NoiseProfile::calibrated(), seed).unwrap();
        let (mut dy, mut dp, mut dpos) = (vec![], vec![], vec![]);
        for i in 0..n {
            let f = pointing_frame(i as f64, 10.0).with_tag(tag);
            let gt = f.ground_truth.unwrap().feature.unwrap();
            let e = p.estimate(&f).unwrap().feature;
            dy.push(metrics::angle_delta_deg(e.yaw_deg(), gt.yaw_deg()));
            dp.push(metrics::angle_delta_deg(e.pitch_deg(), gt.pitch_deg()));
            dpos.push(e.position() - gt.position());
        }
        (metrics::mae(&dy).unwrap(), metrics::mae(&dp).unwrap(), metrics::rmse(&dpos).unwrap())
    }

    #[test]
    fn occlusion_profile_statistics() {
        let (yaw, _pitch, pos) = run_estimates(ScenarioTag::Occlusion, 10_000, 4);
        assert!((yaw - 12.86).abs() < 0.4, "{yaw}");
        assert!((pos - 70.9).abs() < 3.0, "{pos}");
    }

    #[test]
    fn oracle_is_deterministic() {
        assert_eq!(run_estimates(ScenarioTag::Nominal, 500, 3), run_estimates(ScenarioTag::Nominal, 500, 3));
        assert_ne!(run_estimates(ScenarioTag::Nominal, 500, 3), run_estimates(ScenarioTag::Nominal, 500, 4));
    }

    #[test]
    fn tag_selection_prefers_hardest() {
        let p = NoiseProfile::calibrated();
        let tags: BTreeSet<_> = [ScenarioTag::Nominal, ScenarioTag::Sitting, ScenarioTag::DualArm].into();
        assert_eq!(p.for_tags(&tags).classify_success_rate, 0.878);
        assert_eq!(p.for_tags(&BTreeSet::new()).classify_success_rate, 0.972);
    }

    #[test]
    fn debounce_examples() {
        let mut d = Debouncer::new(DebounceConfig::default());
        assert_eq!(d.update(&cls(true, 0.9)), TriggerDecision::Arming { streak: 1 });
        assert_eq!(d.update(&cls(true, 0.9)), TriggerDecision::Arming { streak: 2 });
        assert_eq!(d.update(&cls(true, 0.9)), TriggerDecision::Fire);

        let mut d = Debouncer::new(DebounceConfig::default());
        let stream = [true, true, false, true, true, true];
        let fired: Vec<bool> = stream.iter().map(|&p| d.update(&cls(p, 0.9)) == TriggerDecision::Fire).collect();
        assert_eq!(fired, [false, false, false, false, false, true]);

        let mut d = Debouncer::new(DebounceConfig::default());
        assert!((0..100).all(|_| d.update(&cls(true, 0.3)) != TriggerDecision::Fire));
    }

    fn sample_record(t: f64) -> ReplayRecord {
        ReplayRecord {
            t,
            tags: vec![ScenarioTag::Gloves],
            gt: Some(GroundTruthRecord {
                pointing: true,
                feature: Some(FeatureRecord { p_mm: [1.0, 2.0, 3.0], beta_deg: 20.0, gamma_deg: -5.0 }),
            }),
            cls: cls(true, 0.8),
            est: Some(FeatureRecord { p_mm: [1.5, 2.0, 3.0], beta_deg: 21.0, gamma_deg: -4.0 }),
        }
    }

    #[test]
    fn replay_counts() {
        let mut r = ReplayReader::new(Cursor::new(""));
        assert!(matches!(r.replay_next(), Err(PerceptionError::Exhausted)));

        let mut buf = Vec::new();
        for i in 0..3 {
            write_replay_record(&mut buf, &sample_record(i as f64)).unwrap();
        }
        let mut r = ReplayReader::new(Cursor::new(buf));
        for _ in 0..3 {
            r.replay_next().unwrap();
        }
        assert!(matches!(r.replay_next(), Err(PerceptionError::Exhausted)));
    }

    #[test]
    fn replay_parse_error_has_line() {
        let text = format!("{}\n\n{{not json\n", serde_json::to_string(&sample_record(0.0)).unwrap());
        let mut r = ReplayReader::new(Cursor::new(text));
        r.replay_next().unwrap();
        match r.replay_next() {
            Err(PerceptionError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn not_pointing_gt_omits_feature() {
        let rec = ReplayRecord {
            gt: Some(GroundTruthRecord { pointing: false, feature: None }),
            est: None,
            ..sample_record(0.0)
        };
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"gt\":{\"pointing\":false}"), "{text}");
        let back: ReplayRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn replay_provider_serves_logged_values() {
        let mut p = ReplayProvider::new();
        let frame = p.load(sample_record(2.5)).unwrap();
        assert_eq!(p.classify(&frame).unwrap(), cls(true, 0.8));
        assert_eq!(p.estimate(&frame).unwrap().feature.yaw_deg(), -4.0);
        let other = Frame::new(9.0, None);
        assert!(matches!(p.classify(&other), Err(PerceptionError::FrameMismatch { .. })));
    }

    fn arb_feature_record() -> impl Strategy<Value = FeatureRecord> {
        (proptest::array::uniform3(-5e3f64..5e3), -89.0f64..89.0, -180.0f64..180.0)
            .prop_map(|(p_mm, beta_deg, gamma_deg)| FeatureRecord { p_mm, beta_deg, gamma_deg })
    }

    fn arb_record() -> impl Strategy<Value = ReplayRecord> {
        (
            0.0f64..1e4,
            proptest::sample::subsequence(ScenarioTag::ALL.to_vec(), 0..3),
            proptest::option::of((any::<bool>(), proptest::option::of(arb_feature_record()))),
            any::<bool>(),
            0.0f64..=1.0,
            proptest::option::of(arb_feature_record()),
        )
            .prop_map(|(t, tags, gt, p, c, est)| ReplayRecord {
                t,
                tags,
                gt: gt.map(|(pointing, feature)| GroundTruthRecord { pointing, feature }),
                cls: cls(p, c),
                est,
            })
    }

    proptest! {
        #[test]
        fn replay_round_trip(records in proptest::collection::vec(arb_record(), 0..20)) {
            let mut buf = Vec::new();
            for r in &records {
                write_replay_record(&mut buf, r).unwrap();
            }
            let back: Vec<ReplayRecord> = ReplayReader::new(Cursor::new(buf)).collect::<Result<_>>().unwrap();
            prop_assert_eq!(back, records);
        }

        #[test]
        fn debounce_never_fires_early(stream in proptest::collection::vec((any::<bool>(), 0.0f64..1.0), 0..200), k in 1usize..6) {
            let cfg = DebounceConfig { k, certainty_threshold: 0.5 };
            let mut d = Debouncer::new(cfg);
            let mut run = 0;
            for (p, c) in stream {
                let qualifies = p && c >= 0.5;
                run = if qualifies { run + 1 } else { 0 };
                if d.update(&cls(p, c)) == TriggerDecision::Fire {
                    prop_assert!(run >= k);
                    run = 0;
                }
            }
        }
    }
}
