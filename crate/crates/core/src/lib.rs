//! Pointing-directive toolkit: finger-direction and frame geometry, floor-target
//! resolution, stand-in perception providers, the recognition-trigger pipeline,
//! and a robot-reach simulator with evaluation metrics.
//!
//! Modules:
//!
//! * [`geometry`]: direction vectors, rigid transforms, pointing error, floor targets.
//! * [`measure_compare`]: synthetic comparison of forearm, index-finger and
//!   eyes-finger pointing measurements.
//! * [`metrics`]: IoU, RMSE, MAE, distance-binned curves and angle histograms.
//! * [`perception`]: frames, the provider trait, oracle/replay providers, debounce.
//! * [`pipeline`]: trigger, settle, fuse and dispatch state machine.
//! * [`simworld`]: simulated users, robot kinematics, localization noise, campaigns.

pub mod geometry;
pub mod measure_compare;
pub mod metrics;
pub mod perception;
pub mod pipeline;
pub mod sampling;
pub mod simworld;

pub use geometry::{GeometryError, PointingFeature, Ray, RigidTransform, UnitVec3, Vec3};
pub use measure_compare::{Approach, ApproachStats, MeasurementSample};
pub use metrics::{ErrorSeries, Mask};
pub use perception::{Classification, Frame, NoiseProfile, PerceptionProvider, ScenarioTag};
pub use pipeline::{Pipeline, PipelineConfig, TargetCommand};
pub use simworld::{CampaignConfig, CampaignSummary, RobotMode, TrialRecord, WorldConfig};
