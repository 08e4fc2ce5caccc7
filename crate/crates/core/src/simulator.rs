//! Stochastic placement model.
//!
//! The as-placed centerline is the planned laid path plus a lateral error made
//! of a random walk (so deviation accumulates with printed length) and white
//! repeatability jitter. Speed enters only through end overshoot and width
//! spread. The lateral error is scaled by substrate roughness and, in
//! compaction mode, by the compaction response. Gains are calibrated once and
//! stored in `config/noise.json`; see `examples/calibrate.rs`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cumulative_lengths, Point3};
use crate::mechanics::{
    adhesion_from_peel, anchor_feasible, compaction_quality, interface_peel_force, tension_estimate, AnchorState,
    RoughnessRank, SubstrateSpec, TapeSpec, DEFAULT_TENSION_CAP,
};
use crate::planner::{Mode, MotionProgram, Phase};

pub const OUTCOME_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// σ of the truncated-Gaussian cut position error at each end, m.
    pub cut_irregularity_sigma: f64,
    /// σ of white lateral waypoint noise, m.
    pub repeatability_sigma: f64,
    /// Random-walk intensity of lateral drift, m per √m of travel.
    pub walk_sigma: f64,
    /// Total end overshoot per unit speed, m per (m/s), split over both ends.
    pub accel_overshoot_gain: f64,
    /// Width spread per unit speed, per (m/s).
    pub width_spread_gain: f64,
    /// Fractional change of lateral noise per roughness rank step.
    pub roughness_step: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            cut_irregularity_sigma: 0.0,
            repeatability_sigma: 0.0,
            walk_sigma: 0.0,
            accel_overshoot_gain: 0.0,
            width_spread_gain: 0.0,
            roughness_step: 0.0,
            seed: 0,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        NoiseModel { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cut_irregularity_sigma", self.cut_irregularity_sigma),
            ("repeatability_sigma", self.repeatability_sigma),
            ("walk_sigma", self.walk_sigma),
            ("accel_overshoot_gain", self.accel_overshoot_gain),
            ("width_spread_gain", self.width_spread_gain),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be non-negative")));
            }
        }
        if !(self.roughness_step >= 0.0 && self.roughness_step < 1.0) {
            return Err(Error::invalid("roughness_step must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Lateral-noise multiplier for a substrate; acrylic is the reference.
    pub fn roughness_scale(&self, rank: RoughnessRank) -> f64 {
        1.0 + self.roughness_step * (rank.ordinal() as f64 - RoughnessRank::Acrylic.ordinal() as f64)
    }
}

/// As-placed geometry of one strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacedFeature {
    pub feature: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    pub straight: bool,
    pub closed: bool,
    pub nominal_width: f64,
    pub planned_length: f64,
    pub centerline: Vec<Point3>,
    /// Outward surface normal per sample.
    pub normals: Vec<Point3>,
    pub lateral_deviation: Vec<f64>,
    pub width_profile: Vec<f64>,
    /// Signed tape extension beyond the planned (start, end) cut points, m.
    pub end_cut_offsets: (f64, f64),
}

impl PlacedFeature {
    pub fn validate(&self) -> Result<()> {
        let n = self.centerline.len();
        if self.normals.len() != n || self.lateral_deviation.len() != n || self.width_profile.len() != n {
            return Err(Error::InvalidInput("per-sample profile lengths differ".into()));
        }
        if self.width_profile.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidInput("width must be positive everywhere".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub schema_version: u32,
    pub seed: u64,
    /// Digest of the program this outcome was produced from.
    pub program_digest: String,
    pub features: Vec<PlacedFeature>,
    pub feasibility_flags: Vec<String>,
}

impl PlacementOutcome {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serialization cannot fail")
    }

    /// Per-sample profiles as CSV.
    pub fn profiles_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["feature", "index", "arc_position", "x", "y", "z", "lateral_deviation", "width"])
            .map_err(io)?;
        for f in &self.features {
            let arc = cumulative_lengths(&f.centerline);
            for (i, p) in f.centerline.iter().enumerate() {
                w.serialize((
                    f.feature,
                    i,
                    arc[i],
                    p.x,
                    p.y,
                    p.z,
                    f.lateral_deviation[i],
                    f.width_profile[i],
                ))
                .map_err(io)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian truncated to ±3σ by rejection.
fn truncated_gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    loop {
        let x = gauss(rng);
        if x.abs() <= 3.0 {
            return sigma * x;
        }
    }
}

fn check_span(
    program: &MotionProgram,
    feature: usize,
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    steps: &[usize],
    arc: &[f64],
) -> Result<Option<f64>> {
    let info = &program.features[feature];
    let Some(o) = &info.overhang else {
        return Ok(None);
    };
    let adhesion = adhesion_from_peel(interface_peel_force(tape, substrate), tape.width, o.anchor_length)?;
    let mut worst = f64::INFINITY;
    for (k, &i) in steps.iter().enumerate() {
        let step = &program.steps[i];
        if step.phase != Phase::Span {
            continue;
        }
        let chord = step.pose.position - o.anchor_end;
        let len = chord.norm();
        if len <= 0.0 {
            continue;
        }
        let horizontal = chord.x.hypot(chord.y);
        let alpha = chord.z.atan2(horizontal).clamp(0.0, std::f64::consts::FRAC_PI_2);
        let tension = tension_estimate(o.pull_speed, o.feed_speed, len, tape, DEFAULT_TENSION_CAP)?;
        let check = anchor_feasible(&AnchorState {
            tension,
            alpha,
            adhesion,
            mu: substrate.mu,
        });
        if let Some(mode) = check.failure() {
            return Err(Error::PlacementFailure {
                feature,
                arc_position: arc[k],
                mode: format!("anchor {mode}"),
            });
        }
        worst = worst.min(check.shear_margin.min(check.peel_margin));
    }
    Ok(Some(worst))
}

/// Places every strip of `program` under `noise`. Deterministic for a given
/// `noise.seed`.
pub fn simulate(
    program: &MotionProgram,
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    noise: &NoiseModel,
) -> Result<PlacementOutcome> {
    program.validate()?;
    tape.validate()?;
    substrate.validate()?;
    noise.validate()?;
    let roughness = noise.roughness_scale(substrate.roughness_rank);
    let mut features = Vec::with_capacity(program.features.len());
    let mut flags = Vec::new();

    for (f, info) in program.features.iter().enumerate() {
        let steps = program.laid_steps(f);
        let planned: Vec<Point3> = steps.iter().map(|&i| program.steps[i].pose.position).collect();
        let arc = cumulative_lengths(&planned);
        if let Some(margin) = check_span(program, f, tape, substrate, &steps, &arc)? {
            flags.push(format!("feature {f}: overhang anchor holds, minimum margin {margin:.6} N"));
        }

        let compaction = match info.mode {
            Mode::Compaction => compaction_quality(info.compaction_force)?,
            Mode::Cartesian => 1.0,
        };
        let scale = roughness * compaction;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(f as u64);

        let n = planned.len();
        let mut lateral = Vec::with_capacity(n);
        let mut walk = 0.0;
        for k in 0..n {
            let on_span = program.steps[steps[k]].phase == Phase::Span;
            let (dw, white) = (gauss(&mut rng), gauss(&mut rng));
            if k > 0 && !on_span {
                walk += noise.walk_sigma * (arc[k] - arc[k - 1]).sqrt() * dw;
            }
            let jitter = if on_span { 0.0 } else { noise.repeatability_sigma * white };
            lateral.push(scale * (walk + jitter));
        }

        let normals: Vec<Point3> = planned.iter().map(|&p| info.surface.normal_at(p)).collect();
        let centerline = (0..n)
            .map(|k| {
                let a = planned[k.saturating_sub(1)];
                let b = planned[(k + 1).min(n - 1)];
                let side = normals[k]
                    .cross(b - a)
                    .normalized()
                    .unwrap_or_else(|| normals[k].any_orthogonal());
                planned[k] + side * lateral[k]
            })
            .collect();

        let spread = noise.width_spread_gain * info.speed;
        let width_profile = (0..n)
            .map(|_| tape.width * (1.0 + spread * gauss(&mut rng).abs()))
            .collect();

        let overshoot = noise.accel_overshoot_gain * info.speed / 2.0;
        let end_cut_offsets = (
            overshoot + truncated_gauss(&mut rng, noise.cut_irregularity_sigma),
            overshoot + truncated_gauss(&mut rng, noise.cut_irregularity_sigma),
        );

        features.push(PlacedFeature {
            feature: f,
            layer: info.layer,
            straight: info.straight,
            closed: info.closed,
            nominal_width: tape.width,
            planned_length: info.planned_length,
            centerline,
            normals,
            lateral_deviation: lateral,
            width_profile,
            end_cut_offsets,
        });
    }
    Ok(PlacementOutcome {
        schema_version: OUTCOME_SCHEMA_VERSION,
        seed: noise.seed,
        program_digest: program.digest(),
        features,
        feasibility_flags: flags,
    })
}

/// `n` outcomes with seeds `noise.seed, noise.seed + 1, …`, in seed order.
pub fn batch_simulate(
    program: &MotionProgram,
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    noise: &NoiseModel,
    n: usize,
) -> Result<Vec<PlacementOutcome>> {
    if n == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| simulate(program, tape, substrate, &noise.with_seed(noise.seed.wrapping_add(i))))
        .collect()
}

/// Simulates an overhang fragment; fails at the first span step where the
/// anchor slips (shear) or peels.
pub fn simulate_overhang(
    fragment: &MotionProgram,
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    noise: &NoiseModel,
) -> Result<PlacementOutcome> {
    if !fragment.features.iter().any(|f| f.overhang.is_some()) {
        return Err(Error::InvalidInput("fragment contains no overhang".into()));
    }
    simulate(fragment, tape, substrate, noise)
}
