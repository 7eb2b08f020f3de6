//! Sweeps the drift and bench parameters and prints campaign summaries.
//!
//! cargo run --release -p pointnav-core --example tune_world

use pointnav_core::simworld::{run_campaign, CampaignConfig, DegradedLocalization, LocalizationModel};
use pointnav_core::RobotMode;

fn main() {
    let trials = 2000;
    println!("quadruped: drift sigma (mm/step), bound 400 mm");
    for sigma in [0.0, 8.0, 20.0, 30.0, 35.0, 40.0] {
        let mut c = CampaignConfig::calibrated(RobotMode::Quadruped);
        c.world.localization = LocalizationModel::RtkDrift { step_sigma_mm: sigma, bound_mm: 400.0 };
        let s = run_campaign(&c, trials, 1).unwrap().summary;
        println!(
            "  sigma {sigma:5.1}: success {:5.1}%  error {:6.1} +- {:6.1} mm  distance {:6.0} +- {:5.0} mm",
            100.0 * s.success_rate,
            s.mean_reach_error_mm,
            s.std_reach_error_mm,
            s.mean_distance_mm,
            s.std_distance_mm
        );
    }
    println!("rover: degraded-route probability and drift sigma (mm/step)");
    for (probability, sigma) in [(0.0, 0.0), (0.15, 40.0), (0.2, 40.0), (0.2, 60.0), (0.25, 40.0)] {
        let mut c = CampaignConfig::calibrated(RobotMode::Rover);
        c.world.degraded_localization = Some(DegradedLocalization {
            probability,
            model: LocalizationModel::RtkDrift { step_sigma_mm: sigma, bound_mm: 1500.0 },
        });
        let s = run_campaign(&c, trials, 1).unwrap().summary;
        println!(
            "  p {probability:4.2} sigma {sigma:4.0}: success {:5.1}%  error {:6.1} +- {:6.1} mm  distance {:6.0} +- {:5.0} mm",
            100.0 * s.success_rate,
            s.mean_reach_error_mm,
            s.std_reach_error_mm,
            s.mean_distance_mm,
            s.std_distance_mm
        );
    }
}
