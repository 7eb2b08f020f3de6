//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use pointnav_core::geometry::{RigidTransform, Vec3};
use pointnav_core::measure_compare::{run_comparison, Approach, ApproachStats, ComparisonConfig};
use pointnav_core::metrics::{
    angle_delta_deg, angle_histogram, bin_by_distance, mae, mask_iou, rmse, BinStat, ErrorSeries, ErrorUnit,
};
use pointnav_core::perception::{ReplayProvider, ReplayReader, ScenarioTag};
use pointnav_core::pipeline::{CommandMode, Pipeline, PipelineConfig, PipelineEvent, TargetCommandRecord};
use pointnav_core::simworld::{
    run_campaign, CampaignConfig, CampaignSummary, DegradedLocalization, LocalizationModel, TrialRow,
};
use pointnav_core::RobotMode;
use serde::{Deserialize, Serialize};

use crate::args::{CommonArgs, CompareArgs, MetricsArgs, OutputFormat, ReplayArgs, SimulateArgs};
use crate::config::ConfigFile;
use crate::io::{read_csv, read_pbm, write_json, write_jsonl, write_table};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Settings every subcommand resolves from flags, config and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

pub fn resolve_common(common: &CommonArgs, file: &ConfigFile) -> Result<RunSettings> {
    Ok(RunSettings {
        seed: file.resolve(common.seed, "general", "seed", 0)?,
        out_dir: file.resolve(common.out_dir.clone(), "general", "out_dir", PathBuf::from("."))?,
        format: file.resolve(common.format, "general", "format", OutputFormat::Csv)?,
    })
}

fn positive_trials(trials: usize) -> Result<usize> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(trials)
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompareSummary {
    pub seed: u64,
    pub trials: usize,
    pub approaches: Vec<ApproachStats>,
}

pub fn resolve_compare(args: &CompareArgs) -> Result<(RunSettings, ComparisonConfig)> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let run = resolve_common(&args.common, &file)?;
    let mut c = ComparisonConfig { seed: run.seed, ..ComparisonConfig::default() };
    c.trials = positive_trials(file.resolve(args.trials, "compare", "trials", c.trials)?)?;
    c.bin_mm = file.resolve(args.bin_mm, "compare", "bin_mm", c.bin_mm)?;
    let s = &mut c.scenario;
    file.apply(&mut s.distance_mm.0, "compare", "distance_min_mm")?;
    file.apply(&mut s.distance_mm.1, "compare", "distance_max_mm")?;
    file.apply(&mut s.target_height_mm.0, "compare", "target_height_min_mm")?;
    file.apply(&mut s.target_height_mm.1, "compare", "target_height_max_mm")?;
    file.apply(&mut s.noise.forearm_wrist_deg, "compare", "noise_fa_deg")?;
    file.apply(&mut s.noise.finger_axis_deg, "compare", "noise_if_deg")?;
    file.apply(&mut s.noise.eye_finger_deg, "compare", "noise_ef_deg")?;
    s.validate().map_err(usage)?;
    if !(c.bin_mm > 0.0) {
        return Err(CliError::Usage("bin width must be positive".into()));
    }
    Ok((run, c))
}

pub fn cmd_compare_measures(args: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let (run, config) = resolve_compare(args)?;
    let report = run_comparison(&config).context("comparison run failed")?;
    write_table(&run.out_dir, "approach_errors", &report.rows, run.format)?;
    let summary = CompareSummary { seed: run.seed, trials: config.trials, approaches: report.stats.clone() };
    write_json(&run.out_dir.join("summary.json"), &summary)?;
    for a in Approach::ALL {
        if let Some(s) = report.stats_for(a) {
            writeln!(out, "{a}: mean error {:.1} mm (std {:.1} mm, n = {})", s.mean_error_mm, s.std_error_mm, s.n_trials)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub profile: ScenarioTag,
    #[serde(flatten)]
    pub campaign: CampaignSummary,
}

pub fn resolve_simulate(args: &SimulateArgs) -> Result<(RunSettings, CampaignConfig, usize)> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let run = resolve_common(&args.common, &file)?;
    let mode = match args.mode {
        Some(m) => m,
        None => file.get::<RobotMode>("simulate", "mode")?.unwrap_or(RobotMode::Quadruped),
    };
    let trials = positive_trials(file.resolve(args.trials, "simulate", "trials", 200)?)?;
    let mut c = CampaignConfig::calibrated(mode);
    let w = &mut c.world;
    w.tag = file.resolve(args.profile, "simulate", "profile", ScenarioTag::Nominal)?;
    file.apply(&mut w.camera_height_mm, "simulate", "camera_height_mm")?;
    file.apply(&mut w.camera_tilt_deg, "simulate", "camera_tilt_deg")?;
    file.apply(&mut w.target_distance.mean_mm, "simulate", "target_distance_mean_mm")?;
    file.apply(&mut w.target_distance.std_mm, "simulate", "target_distance_std_mm")?;
    file.apply(&mut w.target_distance.min_mm, "simulate", "target_distance_min_mm")?;
    file.apply(&mut w.target_distance.max_mm, "simulate", "target_distance_max_mm")?;
    file.apply(&mut w.user.distance_mm[0], "simulate", "user_distance_min_mm")?;
    file.apply(&mut w.user.distance_mm[1], "simulate", "user_distance_max_mm")?;
    file.apply(&mut w.robot_radius_mm, "simulate", "robot_radius_mm")?;
    file.apply(&mut w.standoff_mm, "simulate", "standoff_mm")?;
    file.apply(&mut w.success_radius_mm, "simulate", "success_radius_mm")?;
    file.apply(&mut w.robot.speed_mm_s, "simulate", "speed_mm_s")?;
    file.apply(&mut w.line_max_mm, "simulate", "line_max_mm")?;
    if let Some(b) = file.get::<f64>("simulate", "bench_radius_mm")? {
        w.bench_radius_mm = (b > 0.0).then_some(b);
    }
    let drift_sigma = file.get::<f64>("simulate", "drift_sigma_mm")?;
    let drift_bound = file.get::<f64>("simulate", "drift_bound_mm")?;
    let lidar = file.get::<f64>("simulate", "lidar_sigma_mm")?;
    match (drift_sigma.or(drift_bound), lidar) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("drift_* and lidar_sigma_mm are mutually exclusive".into()));
        }
        (Some(_), None) => {
            let (s0, b0) = match w.localization {
                LocalizationModel::RtkDrift { step_sigma_mm, bound_mm } => (step_sigma_mm, bound_mm),
                LocalizationModel::LidarGaussian { .. } => (35.0, 400.0),
            };
            w.localization = LocalizationModel::RtkDrift {
                step_sigma_mm: drift_sigma.unwrap_or(s0),
                bound_mm: drift_bound.unwrap_or(b0),
            };
        }
        (None, Some(sigma_mm)) => w.localization = LocalizationModel::LidarGaussian { sigma_mm },
        (None, None) => {}
    }
    if let Some(p) = file.get::<f64>("simulate", "degraded_probability")? {
        let model = w.degraded_localization.map_or(
            LocalizationModel::RtkDrift { step_sigma_mm: 60.0, bound_mm: 1500.0 },
            |d| d.model,
        );
        w.degraded_localization = (p > 0.0).then_some(DegradedLocalization { probability: p, model });
    }
    w.validate().map_err(usage)?;
    Ok((run, c, trials))
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (run, config, trials) = resolve_simulate(args)?;
    let result = run_campaign(&config, trials, run.seed).context("campaign failed")?;
    let rows: Vec<TrialRow> = result.records.iter().map(TrialRow::from).collect();
    write_table(&run.out_dir, "trials", &rows, run.format)?;
    let s = SimulateSummary { profile: config.world.tag, campaign: result.summary };
    write_json(&run.out_dir.join("summary.json"), &s)?;
    let c = &s.campaign;
    writeln!(out, "mode {} profile {} trials {}", c.mode, s.profile, c.trials)?;
    writeln!(out, "success rate {:.1}% ({}/{})", 100.0 * c.success_rate, c.successes, c.trials)?;
    writeln!(out, "reach error {:.3} +- {:.3} m", c.mean_reach_error_mm / 1000.0, c.std_reach_error_mm / 1000.0)?;
    writeln!(out, "distance to target {:.2} +- {:.2} m", c.mean_distance_mm / 1000.0, c.std_distance_mm / 1000.0)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ReplaySettings {
    pub run: RunSettings,
    pub pipeline: PipelineConfig,
    pub camera_to_robot: RigidTransform,
    pub height_mm: f64,
}

pub fn resolve_replay(args: &ReplayArgs) -> Result<ReplaySettings> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let run = resolve_common(&args.common, &file)?;
    let mode = match args.mode {
        Some(m) => m,
        None => match file.get::<String>("replay", "mode")? {
            Some(s) => crate::args::parse_command_mode(&s).map_err(CliError::Config)?,
            None => CommandMode::DirectGoal,
        },
    };
    let mut pipeline = PipelineConfig { mode, ..PipelineConfig::default() };
    file.apply(&mut pipeline.debounce.k, "replay", "debounce_k")?;
    file.apply(&mut pipeline.debounce.certainty_threshold, "replay", "certainty_threshold")?;
    file.apply(&mut pipeline.settle_frames, "replay", "settle_frames")?;
    file.apply(&mut pipeline.cooldown_s, "replay", "cooldown_s")?;
    pipeline.validate().map_err(usage)?;
    let height_mm = file.resolve(args.height_mm, "replay", "height_mm", 500.0)?;
    let tilt: f64 = file.get("replay", "camera_tilt_deg")?.unwrap_or(0.0);
    let yaw: f64 = file.get("replay", "camera_yaw_deg")?.unwrap_or(0.0);
    let offset = Vec3::new(
        file.get("replay", "camera_x_mm")?.unwrap_or(0.0),
        file.get("replay", "camera_y_mm")?.unwrap_or(0.0),
        file.get("replay", "camera_z_mm")?.unwrap_or(0.0),
    );
    let camera_to_robot = RigidTransform::rotation_z(yaw.to_radians())
        .compose(&RigidTransform::rotation_y(-tilt.to_radians()))
        .with_translation(offset);
    if !(height_mm > 0.0) {
        return Err(CliError::Usage("height must be positive".into()));
    }
    Ok(ReplaySettings { run, pipeline, camera_to_robot, height_mm })
}

/// Replays a session log and returns the emitted commands.
pub fn replay_log(path: &Path, s: &ReplaySettings) -> Result<Vec<TargetCommandRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = ReplayReader::new(BufReader::new(file));
    let mut provider = ReplayProvider::new();
    let mut pipeline = Pipeline::new(s.pipeline, s.camera_to_robot, s.height_mm).map_err(usage)?;
    let mut commands = Vec::new();
    while let Some(rec) = reader.next() {
        let rec = rec.map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let line = reader.line();
        let frame = provider.load(rec).map_err(|e| anyhow!("{}:{line}: {e}", path.display()))?;
        let events = pipeline.step(&frame, &mut provider).map_err(|e| anyhow!("{}:{line}: {e}", path.display()))?;
        for e in events {
            if let PipelineEvent::Command(c) = e {
                commands.push(TargetCommandRecord::from(&c));
            }
        }
    }
    Ok(commands)
}

pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> Result<()> {
    let settings = resolve_replay(args)?;
    let commands = replay_log(&args.log, &settings)?;
    write_jsonl(&settings.run.out_dir.join("commands.jsonl"), &commands)?;
    for c in &commands {
        writeln!(out, "{}", serde_json::to_string(c).map_err(anyhow::Error::from)?)?;
    }
    Ok(())
}

/// Input row for `metrics --series`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub distance_mm: f64,
    pub error: f64,
}

/// Input row for `metrics --estimates`: one estimated and one true feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    /// User distance; the norm of the true position when omitted.
    pub distance_mm: Option<f64>,
    pub true_x_mm: f64,
    pub true_y_mm: f64,
    pub true_z_mm: f64,
    pub est_x_mm: f64,
    pub est_y_mm: f64,
    pub est_z_mm: f64,
    pub true_beta_deg: f64,
    pub est_beta_deg: f64,
    pub true_gamma_deg: f64,
    pub est_gamma_deg: f64,
}

/// One bin of a binned error curve as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

impl From<&BinStat> for BinRow {
    fn from(b: &BinStat) -> Self {
        BinRow { lower: b.lower, upper: b.upper, count: b.count, mean: b.mean, std: b.std }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iou: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position_rmse_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pitch_mae_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub yaw_mae_deg: Option<f64>,
}

fn bins(b: Vec<BinStat>) -> Vec<BinRow> {
    b.iter().map(BinRow::from).collect()
}

pub fn cmd_metrics(args: &MetricsArgs, out: &mut dyn Write) -> Result<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let run = resolve_common(&args.common, &file)?;
    let bin_mm = file.resolve(args.bin_mm, "metrics", "bin_mm", 500.0)?;
    let bin_deg = file.resolve(args.bin_deg, "metrics", "bin_deg", 10.0)?;
    if !(bin_mm > 0.0 && bin_deg > 0.0) {
        return Err(CliError::Usage("bin widths must be positive".into()));
    }
    if args.iou.is_none() && args.series.is_none() && args.estimates.is_none() {
        return Err(CliError::Usage("give at least one of --iou, --series, --estimates".into()));
    }
    let mut summary = MetricsSummary::default();

    if let Some(paths) = &args.iou {
        let (a, b) = (read_pbm(&paths[0])?, read_pbm(&paths[1])?);
        let iou = mask_iou(&a, &b).map_err(|e| anyhow!("{} vs {}: {e}", paths[0].display(), paths[1].display()))?;
        writeln!(out, "iou {iou}")?;
        summary.iou = Some(iou);
    }

    if let Some(path) = &args.series {
        let rows: Vec<SeriesRow> = read_csv(path)?;
        let series = ErrorSeries::new(rows.iter().map(|r| (r.distance_mm, r.error)).collect(), ErrorUnit::Millimeters)
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let b = bins(bin_by_distance(&series, bin_mm).map_err(|e| anyhow!("{}: {e}", path.display()))?);
        write_table(&run.out_dir, "error_bins", &b, run.format)?;
        writeln!(out, "series {} samples in {} bins", series.len(), b.len())?;
        summary.series_samples = Some(series.len());
    }

    if let Some(path) = &args.estimates {
        let rows: Vec<EstimateRow> = read_csv(path)?;
        if rows.is_empty() {
            return Err(anyhow!("{}: no estimates", path.display()).into());
        }
        let truth = |r: &EstimateRow| Vec3::new(r.true_x_mm, r.true_y_mm, r.true_z_mm);
        let deltas: Vec<Vec3> = rows.iter().map(|r| Vec3::new(r.est_x_mm, r.est_y_mm, r.est_z_mm) - truth(r)).collect();
        let pitch: Vec<f64> = rows.iter().map(|r| angle_delta_deg(r.est_beta_deg, r.true_beta_deg)).collect();
        let yaw: Vec<f64> = rows.iter().map(|r| angle_delta_deg(r.est_gamma_deg, r.true_gamma_deg)).collect();
        let pos_rmse = rmse(&deltas).map_err(anyhow::Error::from)?;
        let pitch_mae = mae(&pitch).map_err(anyhow::Error::from)?;
        let yaw_mae = mae(&yaw).map_err(anyhow::Error::from)?;

        let dist = |r: &EstimateRow| r.distance_mm.unwrap_or_else(|| truth(r).norm());
        let position = ErrorSeries::new(
            rows.iter().zip(&deltas).map(|(r, d)| (dist(r), d.norm())).collect(),
            ErrorUnit::Millimeters,
        )
        .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let direction = |errs: &[f64]| {
            ErrorSeries::new(rows.iter().zip(errs).map(|(r, e)| (dist(r), e.abs())).collect(), ErrorUnit::Degrees)
                .map_err(|e| anyhow!("{}: {e}", path.display()))
        };
        let (pitch_series, yaw_series) = (direction(&pitch)?, direction(&yaw)?);
        let to_anyhow = |e: pointnav_core::metrics::MetricsError| anyhow!("{}: {e}", path.display());
        write_table(&run.out_dir, "position_error_bins", &bins(bin_by_distance(&position, bin_mm).map_err(to_anyhow)?), run.format)?;
        write_table(&run.out_dir, "pitch_error_bins", &bins(bin_by_distance(&pitch_series, bin_mm).map_err(to_anyhow)?), run.format)?;
        write_table(&run.out_dir, "yaw_error_bins", &bins(bin_by_distance(&yaw_series, bin_mm).map_err(to_anyhow)?), run.format)?;
        let polar = |truth: &dyn Fn(&EstimateRow) -> f64, errs: &[f64]| {
            let samples: Vec<(f64, f64)> = rows.iter().zip(errs).map(|(r, e)| (truth(r), e.abs())).collect();
            angle_histogram(&samples, bin_deg).map(bins).map_err(to_anyhow)
        };
        write_table(&run.out_dir, "yaw_polar", &polar(&|r| r.true_gamma_deg, &yaw)?, run.format)?;
        write_table(&run.out_dir, "pitch_polar", &polar(&|r| r.true_beta_deg, &pitch)?, run.format)?;
        writeln!(out, "position rmse {pos_rmse:.3} mm")?;
        writeln!(out, "pitch mae {pitch_mae:.3} deg")?;
        writeln!(out, "yaw mae {yaw_mae:.3} deg")?;
        summary.estimates = Some(rows.len());
        summary.position_rmse_mm = Some(pos_rmse);
        summary.pitch_mae_deg = Some(pitch_mae);
        summary.yaw_mae_deg = Some(yaw_mae);
    }

    write_json(&run.out_dir.join("metrics.json"), &summary)?;
    Ok(())
}
