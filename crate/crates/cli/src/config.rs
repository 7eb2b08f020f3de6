//! INI-style run configuration.
//!
//! Sections: `[general]`, `[compare]`, `[simulate]`, `[replay]`, `[metrics]`.
//! Keys are `name = value`; comments go on their own line after `;` or `#`.
//! Unknown sections or keys are rejected so typos do not pass silently.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::CliError;

const KNOWN: &[(&str, &[&str])] = &[
    ("general", &["seed", "out_dir", "format"]),
    (
        "compare",
        &[
            "trials",
            "bin_mm",
            "distance_min_mm",
            "distance_max_mm",
            "target_height_min_mm",
            "target_height_max_mm",
            "noise_fa_deg",
            "noise_if_deg",
            "noise_ef_deg",
        ],
    ),
    (
        "simulate",
        &[
            "mode",
            "trials",
            "profile",
            "camera_height_mm",
            "camera_tilt_deg",
            "target_distance_mean_mm",
            "target_distance_std_mm",
            "target_distance_min_mm",
            "target_distance_max_mm",
            "user_distance_min_mm",
            "user_distance_max_mm",
            "drift_sigma_mm",
            "drift_bound_mm",
            "lidar_sigma_mm",
            "degraded_probability",
            "bench_radius_mm",
            "robot_radius_mm",
            "standoff_mm",
            "success_radius_mm",
            "speed_mm_s",
            "line_max_mm",
        ],
    ),
    (
        "replay",
        &[
            "mode",
            "height_mm",
            "camera_tilt_deg",
            "camera_yaw_deg",
            "camera_x_mm",
            "camera_y_mm",
            "camera_z_mm",
            "debounce_k",
            "certainty_threshold",
            "settle_frames",
            "cooldown_s",
        ],
    ),
    ("metrics", &["bin_mm", "bin_deg"]),
];

/// Parsed configuration file; an empty one when no file was given.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    path: Option<PathBuf>,
    ini: Ini,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, Some(path))
    }

    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self, CliError> {
        let shown = path.map_or_else(|| "<config>".to_string(), |p| p.display().to_string());
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Config(format!("{shown}: {e}")))?;
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(CliError::Config(format!("{shown}: key `{k}` must be inside a section")));
                }
                continue;
            };
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == section) else {
                return Err(CliError::Config(format!("{shown}: unknown section [{section}]")));
            };
            let mut seen = BTreeSet::new();
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(CliError::Config(format!("{shown}: unknown key `{k}` in [{section}]")));
                }
                if !seen.insert(k) {
                    return Err(CliError::Config(format!("{shown}: duplicate key `{k}` in [{section}]")));
                }
            }
        }
        Ok(ConfigFile { path: path.map(Path::to_path_buf), ini })
    }

    fn shown(&self) -> String {
        self.path.as_ref().map_or_else(|| "<config>".to_string(), |p| p.display().to_string())
    }

    /// Typed value of `section.key`, if present.
    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(raw) = self.ini.get_from(Some(section), key) else {
            return Ok(None);
        };
        raw.trim()
            .parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("{}: [{section}] {key} = `{raw}`: {e}", self.shown())))
    }

    /// Command-line value if given, else the config value, else `default`.
    pub fn resolve<T>(&self, flag: Option<T>, section: &str, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(section, key)?.unwrap_or(default)),
        }
    }

    /// Overwrites `target` with `section.key` when present.
    pub fn apply<T>(&self, target: &mut T, section: &str, key: &str) -> Result<(), CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = self.get(section, key)? {
            *target = v;
        }
        Ok(())
    }
}
