use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use tapeslicer::apps::{circuit_check, sensor_response, SensorGrid};
use tapeslicer::config::Catalog;
use tapeslicer::controlsync::{feed_deficit, run_timeline, LatencyModel};
use tapeslicer::geometry::{
    curvature_profile, expand_layers, gen_circle, gen_polygon, gen_wave, polyline_length, project_conformal,
    ConformalPatch, Design, LayerStack, PathFeature, Point3, Surface,
};
use tapeslicer::mechanics::{anchor_feasible, tension_estimate, AnchorState};
use tapeslicer::metrics::{batch_stats, effective_length, feature_quality, straightness_deviation, FeatureQuality};
use tapeslicer::planner::{plan, Mode, MotionProgram, PlanParams, RobotLimits};
use tapeslicer::simulator::{simulate, NoiseModel, PlacedFeature, PlacementOutcome};

fn catalog() -> Catalog {
    Catalog::builtin()
}

fn line_program(length: f64, params: &PlanParams) -> MotionProgram {
    let c = catalog();
    plan(
        &Design::straight_line(length),
        c.tape("copper-6.35").unwrap(),
        c.substrate("acrylic").unwrap(),
        params,
        &RobotLimits::default(),
    )
    .unwrap()
}

fn simulate_line(length: f64, speed: f64, noise: &NoiseModel) -> PlacementOutcome {
    let c = catalog();
    let params = PlanParams { speed, ..PlanParams::default() };
    simulate(
        &line_program(length, &params),
        c.tape("copper-6.35").unwrap(),
        c.substrate("acrylic").unwrap(),
        noise,
    )
    .unwrap()
}

/// Rotation about z by `theta` then an arbitrary translation; normals rotate
/// without translating.
fn transformed(f: &PlacedFeature, theta: f64, shift: Point3) -> PlacedFeature {
    let mut g = f.clone();
    for p in &mut g.centerline {
        *p = p.rotate_z(Point3::ZERO, theta) + shift;
    }
    for n in &mut g.normals {
        *n = n.rotate_z(Point3::ZERO, theta);
    }
    g
}

fn reversed(f: &PlacedFeature) -> PlacedFeature {
    let mut g = f.clone();
    g.centerline.reverse();
    g.normals.reverse();
    g.width_profile.reverse();
    // travel direction flips, so the left side becomes the right side
    g.lateral_deviation = f.lateral_deviation.iter().rev().map(|d| -d).collect();
    g.end_cut_offsets = (f.end_cut_offsets.1, f.end_cut_offsets.0);
    g
}

fn check_path(p: &PathFeature) {
    p.validate().unwrap();
    assert!(p.samples.iter().all(|s| s.is_finite()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generators_satisfy_path_invariants(
        amp in 1e-3..0.01f64,
        wavelength in 0.02..0.08f64,
        total in 0.03..0.2f64,
        diameter in 0.02..0.2f64,
        step in 2e-4..2e-3f64,
        w in 0.01..0.1f64,
        h in 0.01..0.1f64,
    ) {
        check_path(&gen_wave(amp, wavelength, total, step).unwrap());
        check_path(&gen_circle(diameter, step).unwrap());
        let rect = [
            Point3::ZERO,
            Point3::new(w, 0.0, 0.0),
            Point3::new(w, h, 0.0),
            Point3::new(0.0, h, 0.0),
        ];
        check_path(&gen_polygon(&rect, true, step).unwrap());
        check_path(&gen_polygon(&rect, false, step).unwrap());
    }

    #[test]
    fn circle_curvature_is_constant(diameter in 0.02..0.3f64, step in 2e-4..1e-3f64) {
        let profile = curvature_profile(&gen_circle(diameter, step).unwrap()).unwrap();
        let expected = 2.0 / diameter;
        let n = profile.len();
        // two samples next to the seam are excluded
        for s in &profile[1..n - 1] {
            prop_assert!((s.curvature - expected).abs() <= 0.005 * expected);
        }
    }

    #[test]
    fn conformal_length_within_distortion(
        radius in 0.05..0.2f64,
        len in 0.01..0.04f64,
        offset in -0.01..0.01f64,
        heading in 0.0..PI,
    ) {
        let (s, c) = heading.sin_cos();
        let a = Point3::new(-c * len / 2.0 - s * offset, -s * len / 2.0 + c * offset, 0.0);
        let b = Point3::new(c * len / 2.0 - s * offset, s * len / 2.0 + c * offset, 0.0);
        let patch = ConformalPatch {
            surface: Surface::Hemisphere { center: Point3::ZERO, radius },
            path2d: gen_polygon(&[a, b], false, 5e-4).unwrap(),
        };
        let proj = project_conformal(&patch, 5e-4).unwrap();
        let points: Vec<Point3> = proj.poses.iter().map(|p| p.position).collect();
        let measured = polyline_length(&points);
        let bound = proj.distortion * proj.length_2d;
        prop_assert!((measured - proj.length_2d).abs() <= bound + 1e-12);
    }

    #[test]
    fn layer_expansion_preserves_length(
        count in 1usize..6,
        height in 1e-4..1e-3f64,
        rotation in -PI..PI,
        w in 0.01..0.05f64,
    ) {
        let base = gen_polygon(&[Point3::ZERO, Point3::new(w, 0.0, 0.0), Point3::new(w, w / 2.0, 0.0)], false, 1e-3)
            .unwrap();
        let stack = LayerStack { base: base.clone(), layer_count: count, layer_height: height, alternate_rotation: rotation };
        for (path, _, _) in expand_layers(&stack).unwrap() {
            prop_assert!((path.arc_length() - base.arc_length()).abs() <= 1e-12);
        }
    }

    #[test]
    fn anchor_feasibility_monotone(
        tension in 0.0..20.0f64,
        alpha in 0.0..FRAC_PI_2,
        adhesion in 0.0..20.0f64,
        mu in 0.1..1.0f64,
        extra in 0.0..10.0f64,
    ) {
        let base = AnchorState { tension, alpha, adhesion, mu };
        let stronger = AnchorState { adhesion: adhesion + extra, ..base };
        let pulled = AnchorState { tension: tension + extra, ..base };
        if anchor_feasible(&base).feasible {
            prop_assert!(anchor_feasible(&stronger).feasible);
        } else {
            prop_assert!(!anchor_feasible(&pulled).feasible);
        }
    }

    #[test]
    fn anchor_limit_cases(tension in 0.0..20.0f64, adhesion in 0.0..20.0f64, mu in 0.1..1.0f64) {
        let flat = anchor_feasible(&AnchorState { tension, alpha: 0.0, adhesion, mu });
        prop_assert_eq!(flat.feasible, tension <= mu * adhesion);
        let vertical = anchor_feasible(&AnchorState { tension, alpha: FRAC_PI_2, adhesion, mu });
        // cos(π/2) is 6e-17, not 0
        let shear_ok = mu * adhesion >= tension * FRAC_PI_2.cos();
        prop_assert_eq!(vertical.feasible, shear_ok && tension <= adhesion);
    }

    #[test]
    fn tension_non_negative(pull in 0.0..0.2f64, feed in 0.0..0.2f64, span in 1e-3..0.1f64) {
        let c = catalog();
        let tape = c.tape("copper-6.35").unwrap();
        let t = tension_estimate(pull, feed, span, tape, 50.0).unwrap();
        prop_assert!(t >= 0.0);
        if feed >= pull {
            prop_assert_eq!(t, 0.0);
        }
    }

    #[test]
    fn sensor_response_monotone_and_bounded(f in 0.0..20.0f64, df in 1e-3..5.0f64) {
        let grid = SensorGrid::default();
        let a = sensor_response(f, &grid).unwrap();
        let b = sensor_response(f + df, &grid).unwrap();
        prop_assert!(b > a);
        prop_assert!(b < grid.dc_max);
    }

    #[test]
    fn circuit_drop_decreases_with_load(load in 1e-2..1e3f64, factor in 1.01..10.0f64) {
        let c = catalog();
        let tape = c.tape("copper-6.35").unwrap();
        let design = Design::straight_line(0.2);
        let a = circuit_check(&design, tape, 5.0, load, 0.05).unwrap();
        let b = circuit_check(&design, tape, 5.0, load * factor, 0.05).unwrap();
        prop_assert!(b.voltage_drop < a.voltage_drop);
    }

    #[test]
    fn batch_stats_scale_with_deviations(k in 0.1..10.0f64, seed in 0u64..1000) {
        let c = catalog();
        let noise = c.default_noise().with_seed(seed);
        let samples: Vec<FeatureQuality> = (0..5)
            .map(|i| feature_quality(&simulate_line(0.1, 0.05, &noise.with_seed(seed + i)).features[0]).unwrap())
            .collect();
        let scaled: Vec<FeatureQuality> = samples
            .iter()
            .map(|q| FeatureQuality {
                length_error: q.length_error * k,
                width_deviation: q.width_deviation * k,
                profile_roughness: q.profile_roughness * k,
                ..q.clone()
            })
            .collect();
        let a = batch_stats(&samples).unwrap();
        let b = batch_stats(&scaled).unwrap();
        for (x, y) in [(a.length_error, b.length_error), (a.width_deviation, b.width_deviation), (a.profile_roughness, b.profile_roughness)] {
            prop_assert!((y.mean - k * x.mean).abs() <= 1e-12 * (1.0 + x.mean.abs() * k));
            let (sx, sy) = (x.std.unwrap(), y.std.unwrap());
            prop_assert!((sy - k * sx).abs() <= 1e-9 * (1.0 + k * sx));
        }
    }

    #[test]
    fn batch_stats_of_constant_batch(value in -1.0..1.0f64, n in 2usize..8) {
        let c = catalog();
        let q = feature_quality(&simulate_line(0.1, 0.025, &NoiseModel::zero()).features[0]).unwrap();
        let batch = vec![FeatureQuality { length_error: value, ..q }; n];
        let r = batch_stats(&batch).unwrap();
        prop_assert!((r.length_error.mean - value).abs() <= 1e-15);
        prop_assert!(r.length_error.std.unwrap() <= 1e-15);
        drop(c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn straightness_invariant_under_rigid_motion(
        seed in 0u64..10_000,
        theta in -PI..PI,
        dx in -1.0..1.0f64,
        dy in -1.0..1.0f64,
        dz in -0.1..0.1f64,
    ) {
        let noise = catalog().default_noise().with_seed(seed);
        let f = &simulate_line(0.1, 0.025, &noise).features[0];
        let g = transformed(f, theta, Point3::new(dx, dy, dz));
        let (a, b) = (straightness_deviation(f).unwrap(), straightness_deviation(&g).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn effective_length_invariant(
        seed in 0u64..10_000,
        theta in -PI..PI,
        dx in -1.0..1.0f64,
        dy in -1.0..1.0f64,
    ) {
        let noise = catalog().default_noise().with_seed(seed);
        let f = &simulate_line(0.12, 0.05, &noise).features[0];
        let a = effective_length(f).unwrap();
        let moved = effective_length(&transformed(f, theta, Point3::new(dx, dy, 0.0))).unwrap();
        let back = effective_length(&reversed(f)).unwrap();
        prop_assert!((a - moved).abs() <= 1e-12);
        prop_assert!((a - back).abs() <= 1e-12);
    }

    #[test]
    fn zero_noise_reproduces_plan(length in 0.02..0.25f64, speed in 0.01..0.1f64) {
        let o = simulate_line(length, speed, &NoiseModel::zero());
        let f = &o.features[0];
        prop_assert!((effective_length(f).unwrap() - f.planned_length).abs() <= 1e-9);
        prop_assert!((polyline_length(&f.centerline) - f.planned_length).abs() <= 1e-9);
        let q = feature_quality(f).unwrap();
        prop_assert_eq!(q.straightness_ratio, Some(0.0));
    }

    #[test]
    fn simulation_deterministic(seed in any::<u64>()) {
        let noise = catalog().default_noise().with_seed(seed);
        prop_assert_eq!(simulate_line(0.05, 0.05, &noise).to_json(), simulate_line(0.05, 0.05, &noise).to_json());
    }

    #[test]
    fn plan_deterministic_and_mode_contract(length in 0.02..0.2f64, speed in 0.01..0.1f64, force in 0.5..8.0f64) {
        let cart = PlanParams { speed, ..PlanParams::default() };
        let a = line_program(length, &cart);
        prop_assert_eq!(a.to_json(), line_program(length, &cart).to_json());
        prop_assert!(a.steps.iter().all(|s| s.compaction_setpoint == 0.0));
        let comp = PlanParams { speed, mode: Mode::Compaction, compaction_force: force, ..PlanParams::default() };
        let b = line_program(length, &comp);
        prop_assert!(b.steps.iter().filter(|s| s.phase.is_laying()).all(|s| s.compaction_setpoint == force));
        let expected = b.features[0].planned_length / speed;
        prop_assert!((b.laying_time(0) - expected).abs() <= 1e-3 * expected);
    }

    #[test]
    fn feed_deficit_linear_in_delay(delay in 0.0..0.05f64, speed in 0.01..0.1f64) {
        let program = line_program(0.1, &PlanParams { speed, ..PlanParams::default() });
        let trace = run_timeline(&program, &LatencyModel::fixed(delay)).unwrap();
        let deficit = feed_deficit(&trace, &program).unwrap()[0];
        // fed length is quantized to whole motor steps
        prop_assert!((deficit - speed * delay).abs() <= trace.pcm.quantum());
    }

    #[test]
    fn feed_conserved_and_causal(delay in 0.0..0.05f64, jitter in 0.0..0.01f64, seed in any::<u64>()) {
        let program = line_program(0.08, &PlanParams::default());
        let latency = LatencyModel { fixed_delay: delay, jitter_sigma: jitter, seed };
        let trace = run_timeline(&program, &latency).unwrap();
        for e in &trace.events {
            if let Some(cause) = e.cause {
                prop_assert!(e.t >= trace.events[cause].t);
            }
        }
        let q = trace.pcm.quantum();
        for f in &trace.features {
            prop_assert!((f.steps as f64 * q - f.fed_length).abs() <= 1e-12);
        }
        let total: u64 = trace.features.iter().map(|f| f.steps).sum();
        prop_assert_eq!(trace.feed_history.last().unwrap().steps_issued, total);
        prop_assert_eq!(trace.to_json(), run_timeline(&program, &latency).unwrap().to_json());
    }
}

#[test]
fn substrate_noise_follows_roughness_rank() {
    let c = catalog();
    let noise = c.default_noise();
    let scales: Vec<f64> = ["metal", "acrylic", "wood"]
        .iter()
        .map(|s| noise.roughness_scale(c.substrate(s).unwrap().roughness_rank))
        .collect();
    assert!(scales[0] < scales[1] && scales[1] < scales[2]);

    let program = line_program(0.15, &PlanParams::default());
    let tape = c.tape("copper-6.35").unwrap();
    let mean_roughness = |name: &str| {
        let sub = c.substrate(name).unwrap();
        (0..100)
            .map(|i| {
                let o = simulate(&program, tape, sub, &noise.with_seed(i)).unwrap();
                feature_quality(&o.features[0]).unwrap().profile_roughness
            })
            .sum::<f64>()
            / 100.0
    };
    let r: Vec<f64> = ["metal", "acrylic", "wood"].iter().map(|s| mean_roughness(s)).collect();
    assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
}
