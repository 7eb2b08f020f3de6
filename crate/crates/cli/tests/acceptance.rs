//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pointnav_core::geometry::{direction_from_angles, pointing_error, resolve_target, PointingFeature, RigidTransform, Vec3};
use pointnav_core::measure_compare::Approach;
use pointnav_core::metrics::{angle_delta_deg, mae, mask_iou, rmse, Mask};
use pointnav_core::perception::{
    Classification, Estimate, Frame, GroundTruth, NoiseProfile, OracleProvider, PerceptionError, PerceptionProvider,
    ScenarioTag,
};
use pointnav_core::pipeline::{CommandMode, Pipeline, PipelineConfig, PipelineEvent};
use pointnav_core::sampling::stream_rng;
use pointnav_core::simworld::{run_campaign, run_trial, CampaignConfig, WorldConfig};
use pointnav_core::RobotMode;
use rand::Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let r = f();
    let took = start.elapsed();
    let note = format!("{:.2} s", took.as_secs_f64());
    match (r, limit) {
        (Ok(d), Some(l)) if took > l => Err(format!("{d}; runtime {note} exceeds {:.0} s", l.as_secs_f64())),
        (Ok(d), _) => Ok(format!("{d}; {note}")),
        (Err(d), _) => Err(format!("{d}; {note}")),
    }
}

fn geometry_exactness() -> Outcome {
    let mut rng = stream_rng(1, 0);
    let (mut worst_z, mut worst_line) = (0.0f64, 0.0f64);
    for _ in 0..100_000 {
        let h = rng.gen_range(100.0..2500.0);
        let p = Vec3::new(rng.gen_range(-5000.0..5000.0), rng.gen_range(-5000.0..5000.0), rng.gen_range(-h + 10.0..2500.0));
        let beta = rng.gen_range(0.01f64..89.9).to_radians();
        let gamma = rng.gen_range(-180.0f64..180.0).to_radians();
        let x = direction_from_angles(beta, gamma).map_err(|e| e.to_string())?;
        let g = resolve_target(p, x, h).map_err(|e| e.to_string())?;
        worst_z = worst_z.max((g.z + h).abs());
        worst_line = worst_line.max((g - p).cross(x.as_vec()).norm());
    }
    check(
        worst_z < 1e-9 && worst_line < 1e-6,
        format!("10^5 cases, max |g.z+h| = {worst_z:.2e} mm, max collinearity residual = {worst_line:.2e} mm"),
    )
}

/// Distance from `g` to the line by golden-section search over the line parameter.
fn brute_force_distance(g: Vec3, p: Vec3, v: Vec3) -> f64 {
    let f = |t: f64| (g - (p + v * t)).norm();
    let scale = (g - p).norm() / v.norm() + 1.0;
    let (mut a, mut b) = (-2.0 * scale, 2.0 * scale);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - r * (b - a);
        let d = a + r * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    f(0.5 * (a + b))
}

fn pointing_error_oracle() -> Outcome {
    let mut rng = stream_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut v3 = || Vec3::new(rng.gen_range(-3000.0..3000.0), rng.gen_range(-3000.0..3000.0), rng.gen_range(-3000.0..3000.0));
        let (g, p) = (v3(), v3());
        let v = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        if v.norm() < 1e-3 {
            continue;
        }
        let e = pointing_error(g, p, v).map_err(|e| e.to_string())?;
        worst = worst.max((e - brute_force_distance(g, p, v)).abs());
    }
    check(worst < 1e-6, format!("10^4 cases, max deviation {worst:.2e} mm"))
}

fn pointnav(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_pointnav")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("pointnav {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pointnav-acceptance-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn compare_measures_reproduction() -> Outcome {
    let dir = scratch("compare");
    pointnav(&["compare-measures", "--trials", "10000", "--seed", "0", "--out-dir", dir.to_str().unwrap()])?;
    let text = std::fs::read_to_string(dir.join("summary.json")).map_err(|e| e.to_string())?;
    let summary: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut means = BTreeMap::new();
    for s in summary["approaches"].as_array().ok_or("summary has no approaches")? {
        means.insert(s["approach"].as_str().unwrap_or_default().to_string(), s["mean_error_mm"].as_f64().unwrap_or(f64::NAN));
    }
    let _ = std::fs::remove_dir_all(&dir);
    let reference = [(Approach::FA, 491.9), (Approach::IF, 333.3), (Approach::EF, 157.8)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, r) in reference {
        let m = means.get(a.as_str()).copied().unwrap_or(f64::NAN);
        ok &= (m - r).abs() <= 0.15 * r;
        parts.push(format!("{a} {m:.1} mm (ref {r})"));
    }
    let (fa, if_, ef) = (means["FA"], means["IF"], means["EF"]);
    ok &= ef < if_ && if_ < fa;
    check(ok, format!("{}; ordering EF < IF < FA: {}", parts.join(", "), ef < if_ && if_ < fa))
}

fn random_feature<R: Rng>(rng: &mut R) -> PointingFeature {
    let p = Vec3::new(rng.gen_range(1000.0..4500.0), rng.gen_range(-1500.0..1500.0), rng.gen_range(-300.0..800.0));
    PointingFeature::from_degrees(p, rng.gen_range(5.0..60.0), rng.gen_range(-100.0..100.0)).unwrap()
}

fn perception_calibration() -> Outcome {
    let profile = NoiseProfile::calibrated();
    let mut provider = OracleProvider::new(profile.clone(), 4).map_err(|e| e.to_string())?;
    let mut rng = stream_rng(4, 1);
    let (mut yaw, mut pitch, mut pos) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..10_000 {
        let f = random_feature(&mut rng);
        let frame = Frame::new(i as f64, Some(GroundTruth { is_pointing: true, feature: Some(f) }));
        let e = provider.estimate(&frame).map_err(|e| e.to_string())?.feature;
        yaw.push(angle_delta_deg(e.yaw_deg(), f.yaw_deg()));
        pitch.push(angle_delta_deg(e.pitch_deg(), f.pitch_deg()));
        pos.push(e.position() - f.position());
    }
    let (yaw_mae, pitch_mae, pos_rmse) =
        (mae(&yaw).unwrap(), mae(&pitch).unwrap(), rmse(&pos).unwrap());
    let mut ok = (yaw_mae - 1.4).abs() <= 0.2 && (pitch_mae - 0.61).abs() <= 0.1 && (pos_rmse - 61.3).abs() <= 5.0;
    let mut parts = vec![format!("yaw MAE {yaw_mae:.3} deg, pitch MAE {pitch_mae:.3} deg, position RMSE {pos_rmse:.1} mm")];
    for tag in ScenarioTag::ALL {
        let mut provider = OracleProvider::new(profile.clone(), 40 + tag as u64).map_err(|e| e.to_string())?;
        let mut correct = 0;
        for i in 0..10_000 {
            let f = random_feature(&mut rng);
            let truth = i % 2 == 0;
            let frame = Frame::new(i as f64, Some(GroundTruth { is_pointing: truth, feature: Some(f) })).with_tag(tag);
            correct += (provider.classify(&frame).map_err(|e| e.to_string())?.is_pointing == truth) as usize;
        }
        let rate = 100.0 * correct as f64 / 10_000.0;
        let target = 100.0 * profile.per_tag[&tag].classify_success_rate;
        ok &= (rate - target).abs() <= 1.5;
        parts.push(format!("{tag} {rate:.1}% (cfg {target:.1}%)"));
    }
    check(ok, parts.join(", "))
}

fn zero_noise_identity() -> Outcome {
    let world = WorldConfig::quadruped().without_localization_noise();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let r = run_trial(&world, &NoiseProfile::zero(), seed).map_err(|e| e.to_string())?;
        worst = worst.max(r.reach_error_mm);
    }
    check(worst < 1.0, format!("20 quadruped trials, max reach error {worst:.2e} mm"))
}

fn table_six_bands() -> Outcome {
    let q = run_campaign(&CampaignConfig::calibrated(RobotMode::Quadruped), 200, 0).map_err(|e| e.to_string())?.summary;
    let r = run_campaign(&CampaignConfig::calibrated(RobotMode::Rover), 200, 0).map_err(|e| e.to_string())?.summary;
    let q_ok = (100.0..=650.0).contains(&q.mean_reach_error_mm) && q.success_rate >= 0.9;
    let r_ok = (0.75..=0.95).contains(&r.success_rate);
    check(
        q_ok && r_ok,
        format!(
            "quadruped: error {:.2}+-{:.2} m at {:.2}+-{:.2} m, success {:.1}%; rover: success {:.1}% at {:.2}+-{:.2} m",
            q.mean_reach_error_mm / 1000.0,
            q.std_reach_error_mm / 1000.0,
            q.mean_distance_mm / 1000.0,
            q.std_distance_mm / 1000.0,
            100.0 * q.success_rate,
            100.0 * r.success_rate,
            r.mean_distance_mm / 1000.0,
            r.std_distance_mm / 1000.0
        ),
    )
}

/// Replays a fixed script and logs which frames were classified.
struct Script {
    dt: f64,
    cls: Vec<Classification>,
    est: Vec<Option<PointingFeature>>,
    classified: Vec<usize>,
}

impl Script {
    fn index(&self, f: &Frame) -> usize {
        (f.timestamp / self.dt).round() as usize - 1
    }
}

impl PerceptionProvider for Script {
    fn classify(&mut self, f: &Frame) -> Result<Classification, PerceptionError> {
        let i = self.index(f);
        self.classified.push(i);
        Ok(self.cls[i])
    }
    fn estimate(&mut self, f: &Frame) -> Result<Estimate, PerceptionError> {
        self.est[self.index(f)].map(Estimate::new).ok_or(PerceptionError::Exhausted)
    }
}

fn pipeline_invariants() -> Outcome {
    let valid = PointingFeature::from_degrees(Vec3::new(2000.0, 0.0, 300.0), 25.0, 100.0).unwrap();
    let level = PointingFeature::from_degrees(Vec3::new(2000.0, 0.0, 300.0), 0.0, 10.0).unwrap();
    let wide = PointingFeature::from_degrees(Vec3::new(2000.0, 0.0, 300.0), 25.0, 150.0).unwrap();
    let (mut triggers_total, mut commands_total, mut failures_total) = (0, 0, 0);
    for s in 0..1000u64 {
        let mut rng = stream_rng(7, s);
        let k = rng.gen_range(1..=4);
        let settle = rng.gen_range(1..=6);
        let cooldown = [0.0, 0.1, 0.5, 1.0][rng.gen_range(0..4)];
        let mode = if rng.gen_bool(0.5) { CommandMode::DirectGoal } else { CommandMode::FloorLine };
        let threshold = 0.5;
        let mut config = PipelineConfig { settle_frames: settle, cooldown_s: cooldown, mode, ..PipelineConfig::default() };
        config.debounce.k = k;
        config.debounce.certainty_threshold = threshold;
        let dt = 1.0 / 30.0;
        let n = rng.gen_range(0..150);
        let p_point = rng.gen_range(0.1..0.95);
        let mut cls = Vec::new();
        let mut est = Vec::new();
        for _ in 0..n {
            cls.push(Classification { is_pointing: rng.gen_bool(p_point), certainty: rng.gen_range(0.0..1.0) });
            est.push(match rng.gen_range(0..20) {
                0 => None,
                1 => Some(level),
                2 => Some(wide),
                _ => Some(valid),
            });
        }
        // tail: finish any settle window, wait out the cooldown, then one clean gesture
        let tail_start = n;
        let good = Classification { is_pointing: true, certainty: 0.9 };
        for _ in 0..settle {
            cls.push(good);
            est.push(Some(valid));
        }
        let gap = ((cooldown + 1.0) / dt).ceil() as usize;
        for _ in 0..gap {
            cls.push(Classification { is_pointing: false, certainty: 0.9 });
            est.push(None);
        }
        let gesture_start = cls.len();
        for _ in 0..(k + settle) {
            cls.push(good);
            est.push(Some(valid));
        }
        let qualifies: Vec<bool> = cls.iter().map(|c| c.is_pointing && c.certainty >= threshold).collect();
        let mut script = Script { dt, cls, est, classified: Vec::new() };
        let mut pipeline = Pipeline::new(config, RigidTransform::rotation_z(0.3), 600.0).map_err(|e| e.to_string())?;
        let mut triggers = Vec::new();
        let mut terminals = Vec::new();
        let mut commands_at = Vec::new();
        for i in 0..qualifies.len() {
            let frame = Frame::new((i + 1) as f64 * dt, None);
            let before = script.classified.len();
            for e in pipeline.step(&frame, &mut script).map_err(|e| format!("stream {s}: {e}"))? {
                match e {
                    PipelineEvent::Triggered { .. } => {
                        // the last k classified frames are consecutive, qualifying and end here
                        let log = &script.classified;
                        let fired_here = log.len() == before + 1 && log.last() == Some(&i);
                        let streak_ok = log.len() >= k
                            && log[log.len() - k..].iter().enumerate().all(|(j, &f)| f + k == i + 1 + j && qualifies[f]);
                        if !(fired_here && streak_ok) {
                            return Err(format!("stream {s}: trigger at frame {i} without {k} qualifying frames"));
                        }
                        triggers.push(i);
                    }
                    PipelineEvent::Command(_) => {
                        terminals.push(i);
                        commands_at.push(i);
                    }
                    PipelineEvent::DispatchFailed { .. } => terminals.push(i),
                    _ => {}
                }
            }
        }
        let has_run = |upto: usize| qualifies[..upto].windows(k).any(|w| w.iter().all(|&q| q));
        if !has_run(tail_start) && triggers.iter().any(|&t| t < tail_start) {
            return Err(format!("stream {s}: triggered without a qualifying run"));
        }
        if triggers.len() != terminals.len() {
            return Err(format!("stream {s}: {} triggers but {} outcomes", triggers.len(), terminals.len()));
        }
        for (t, o) in triggers.iter().zip(&terminals) {
            if *o != t + settle {
                return Err(format!("stream {s}: trigger at {t} resolved at {o}, expected {}", t + settle));
            }
        }
        // the final clean gesture always yields a command: no stuck state
        if !commands_at.iter().any(|&c| c >= gesture_start) {
            return Err(format!(
                "stream {s}: clean gesture after the cooldown produced no command (k {k}, settle {settle}, cooldown {cooldown}, n {n}, gesture at {gesture_start}, triggers {triggers:?}, outcomes {terminals:?}, commands {commands_at:?})"
            ));
        }
        triggers_total += triggers.len();
        commands_total += commands_at.len();
        failures_total += terminals.len() - commands_at.len();
    }
    Ok(format!(
        "10^3 streams, {triggers_total} triggers, {commands_total} commands, {failures_total} dispatch failures, one outcome per trigger"
    ))
}

fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut m = BTreeMap::new();
    for e in std::fs::read_dir(dir).into_iter().flatten().flatten() {
        m.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default());
    }
    m
}

fn determinism() -> Outcome {
    let runs: [(&str, Vec<&str>); 5] = [
        ("compare-csv", vec!["compare-measures", "--trials", "3000", "--seed", "11"]),
        ("compare-jsonl", vec!["compare-measures", "--trials", "3000", "--seed", "11", "--format", "jsonl"]),
        ("quadruped", vec!["simulate", "--mode", "quadruped", "--trials", "60", "--seed", "11"]),
        ("rover", vec!["simulate", "--mode", "rover", "--trials", "60", "--seed", "11", "--format", "jsonl"]),
        ("gloves", vec!["simulate", "--profile", "gloves", "--trials", "60", "--seed", "12"]),
    ];
    let mut files = 0;
    for (name, args) in runs {
        let mut outs = Vec::new();
        for rep in 0..2 {
            let dir = scratch(&format!("det-{name}-{rep}"));
            let mut a = args.clone();
            a.extend(["--out-dir", dir.to_str().unwrap()]);
            pointnav(&a)?;
            outs.push(dir_contents(&dir));
            let _ = std::fs::remove_dir_all(&dir);
        }
        if outs[0].is_empty() || outs[0] != outs[1] {
            return Err(format!("{name}: outputs differ between runs"));
        }
        files += outs[0].len();
    }
    Ok(format!("5 seeded runs repeated, {files} files byte-identical"))
}

fn metric_oracles() -> Outcome {
    let block = |dx: usize| {
        let mut m = Mask::empty(4, 4);
        for y in 1..3 {
            for x in 0..2 {
                m.set(x + dx, y, true);
            }
        }
        m
    };
    let full = Mask::from_rows(&[[true; 3]; 3]).unwrap();
    let corner = Mask::from_rows(&[[true, false, false], [false; 3], [false; 3]]).unwrap();
    let v = |x, y, z| Vec3::new(x, y, z);
    let cases: Vec<(&str, f64, f64)> = vec![
        ("iou identical", mask_iou(&block(0), &block(0)).unwrap(), 1.0),
        ("iou shifted block", mask_iou(&block(0), &block(1)).unwrap(), 2.0 / 6.0),
        ("iou disjoint", mask_iou(&block(0), &block(2)).unwrap(), 0.0),
        ("iou both empty", mask_iou(&Mask::empty(3, 3), &Mask::empty(3, 3)).unwrap(), 1.0),
        ("iou one empty", mask_iou(&Mask::empty(3, 3), &corner).unwrap(), 0.0),
        ("iou subset", mask_iou(&full, &corner).unwrap(), 1.0 / 9.0),
        ("rmse zeros", rmse(&[Vec3::ZERO, Vec3::ZERO]).unwrap(), 0.0),
        ("rmse 3-4-5", rmse(&[v(3.0, 4.0, 0.0), v(0.0, 0.0, 5.0)]).unwrap(), 5.0),
        ("rmse single", rmse(&[v(1.0, 2.0, 2.0)]).unwrap(), 3.0),
        ("mae +-3", mae(&[3.0, -3.0]).unwrap(), 3.0),
        ("mae wrap 179/-179", mae(&[angle_delta_deg(179.0, -179.0)]).unwrap(), 2.0),
        ("mae wrap 350", mae(&[350.0]).unwrap(), 10.0),
        ("mae wrap -350 and 5", mae(&[-350.0, 5.0]).unwrap(), 7.5),
        ("delta across seam", angle_delta_deg(-170.0, 170.0), 20.0),
    ];
    let bad: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| (got - want).abs() > 1e-12)
        .map(|(n, got, want)| format!("{n}: {got} != {want}"))
        .collect();
    let empty_err = rmse(&[]).is_err() && mae(&[]).is_err() && mask_iou(&Mask::empty(2, 2), &Mask::empty(3, 2)).is_err();
    check(
        bad.is_empty() && empty_err,
        if bad.is_empty() { format!("{} fixed cases exact to 1e-12, error cases rejected", cases.len()) } else { bad.join("; ") },
    )
}

type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("geometry exactness", Some(1), geometry_exactness),
        ("pointing error vs brute force", Some(1), pointing_error_oracle),
        ("measure comparison reproduction", Some(10), compare_measures_reproduction),
        ("perception oracle calibration", None, perception_calibration),
        ("zero-noise end-to-end identity", None, zero_noise_identity),
        ("reach campaign bands", Some(60), table_six_bands),
        ("pipeline invariants", None, pipeline_invariants),
        ("determinism", None, determinism),
        ("metric oracles", None, metric_oracles),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let r = timed(limit.map(Duration::from_secs), f);
        let (tag, detail) = match r {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
