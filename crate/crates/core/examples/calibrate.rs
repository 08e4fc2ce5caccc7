//! Derivation of the constants in `config/noise.json`.
//!
//! Closed-form gains:
//! - end overshoot: a strip printed at speed v gains `g·v` of length in
//!   total, so a 3.3% error on a 15 cm line at 100 mm/s gives
//!   g = 0.033 · 0.15 / 0.1 ≈ 0.0495 m per m/s.
//! - width spread: mean width grows by `g_w·v·E|ξ|` with ξ standard normal,
//!   E|ξ| = √(2/π); 6.3% at 100 mm/s gives g_w = 0.063 / (0.1·0.798) ≈ 0.79.
//!
//! The random-walk intensity has no closed form under the edge-based
//! straightness measure, so it is found by bisection on the simulated mean
//! straightness ratio of a 15 cm line at 25 mm/s (target 0.2%).
//!
//! Run with `cargo run --release -p tapeslicer --example calibrate`. The
//! table printed at the end is the same set of scenarios the acceptance
//! suite evaluates, using the constants currently in the config.

use tapeslicer::config::Catalog;
use tapeslicer::geometry::Design;
use tapeslicer::metrics::{batch_report, QualityReport};
use tapeslicer::planner::{plan, Mode, PlanParams, RobotLimits};
use tapeslicer::simulator::{batch_simulate, NoiseModel};

fn report(catalog: &Catalog, noise: &NoiseModel, length: f64, params: PlanParams, n: usize) -> QualityReport {
    let tape = catalog.tape("copper-6.35").unwrap();
    let sub = catalog.substrate("acrylic").unwrap();
    let program = plan(&Design::straight_line(length), tape, sub, &params, &RobotLimits::default()).unwrap();
    let outcomes = batch_simulate(&program, tape, sub, noise, n).unwrap();
    batch_report(&outcomes).unwrap().remove(0)
}

fn at_speed(speed: f64) -> PlanParams {
    PlanParams {
        speed,
        ..PlanParams::default()
    }
}

fn main() {
    let catalog = Catalog::builtin();
    let base = catalog.default_noise().clone();
    println!("overshoot gain  {:.5}", 0.033 * 0.15 / 0.1);
    println!("width gain      {:.5}", 0.063 / (0.1 * (2.0 / std::f64::consts::PI).sqrt()));

    let ratio = |walk: f64| {
        let noise = NoiseModel {
            walk_sigma: walk,
            seed: 1_000_000,
            ..base.clone()
        };
        report(&catalog, &noise, 0.15, at_speed(0.025), 500)
            .straightness_ratio
            .unwrap()
            .mean
    };
    let (mut lo, mut hi): (f64, f64) = (1e-5, 5e-3);
    for _ in 0..30 {
        let mid = (lo * hi).sqrt();
        if ratio(mid) < 0.002 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    println!("walk sigma      {:.3e} m/√m (ratio {:.4}%)", lo, 100.0 * ratio(lo));

    println!("\nscenarios with current config ({})", catalog.noise.calibration_version);
    let r = report(&catalog, &base, 0.15, at_speed(0.025), 500);
    println!("straightness ratio 15 cm @ 25 mm/s: {:.4}%", 100.0 * r.straightness_ratio.unwrap().mean);
    for v in [0.01, 0.025, 0.05, 0.075, 0.1] {
        let r = report(&catalog, &base, 0.15, at_speed(v), 500);
        println!(
            "speed {:>5.0} mm/s: length error {:.3}%  width deviation {:.3}%",
            v * 1e3,
            100.0 * r.length_error.mean,
            100.0 * r.width_deviation.mean
        );
    }
    for f in [2.0, 4.0, 6.0, 8.0] {
        let params = PlanParams {
            mode: Mode::Compaction,
            compaction_force: f,
            ..PlanParams::default()
        };
        let r = report(&catalog, &base, 0.15, params, 200);
        println!("compaction {f} N: straightness {:.4} mm", 1e3 * r.straightness_deviation.unwrap().mean);
    }
    for l in [0.05, 0.10, 0.15, 0.20] {
        let r = report(&catalog, &base, l, PlanParams::default(), 200);
        println!(
            "length {:>3.0} cm: straightness {:.4} mm  length error {:.3}%",
            l * 100.0,
            1e3 * r.straightness_deviation.unwrap().mean,
            100.0 * r.length_error.mean
        );
    }
}
