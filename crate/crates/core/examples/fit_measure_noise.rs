//! Refits the default pointing-measurement noise sigmas.
//!
//! Usage: `cargo run --release -p pointnav-core --example fit_measure_noise [trials] [seed]`

use pointnav_core::measure_compare::{calibrate, run_comparison, ComparisonConfig, REFERENCE_MEANS_MM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let trials = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);
    let base = ComparisonConfig { trials, seed, ..ComparisonConfig::default() };
    let fitted = calibrate(&base, REFERENCE_MEANS_MM)?;
    println!("fitted sigmas (deg): {fitted:?}");

    let check = ComparisonConfig { trials: 10_000, seed: seed + 1, ..base };
    let mut check = check;
    check.scenario.noise = fitted;
    let report = run_comparison(&check)?;
    for (s, target) in report.stats.iter().zip(REFERENCE_MEANS_MM) {
        println!("{}: mean {:.1} mm (target {target} mm), std {:.1} mm", s.approach, s.mean_error_mm, s.std_error_mm);
    }
    Ok(())
}
