//! Force model for tape placement: anchor feasibility under tension, adhesion
//! from peel data, tension from feed/pull rate mismatch, wrinkle risk,
//! compaction response and trace resistance.

use serde::{Deserialize, Serialize};

use crate::error::{AnchorFailure, Error, Result};

/// Peeled length over which catalog peel forces were measured.
pub const PEEL_REFERENCE_LENGTH: f64 = 0.05;
/// Tape width that `min_radius` thresholds refer to (0.25 in).
pub const REFERENCE_TAPE_WIDTH: f64 = 6.35e-3;
/// Compaction force with the smallest placement deviation.
pub const OPTIMAL_COMPACTION_FORCE: f64 = 4.0;
/// Default curvature of the compaction response, N⁻².
pub const DEFAULT_COMPACTION_CURVATURE: f64 = 0.05;
/// Default ceiling on estimated tape tension.
pub const DEFAULT_TENSION_CAP: f64 = 5.0;
/// Feed speeds below this are treated as this value in the strain estimate.
pub const MIN_FEED_SPEED: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapeSpec {
    pub name: String,
    pub width: f64,
    pub thickness: f64,
    /// Pa
    pub elastic_modulus: f64,
    /// Ω·m
    pub resistivity: f64,
    /// Adhesive peel strength, N per meter of width.
    pub peel_strength: f64,
}

impl TapeSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("width", self.width),
            ("thickness", self.thickness),
            ("elastic_modulus", self.elastic_modulus),
            ("resistivity", self.resistivity),
            ("peel_strength", self.peel_strength),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("tape {}: {name} must be positive", self.name)));
            }
        }
        Ok(())
    }

    /// Axial stiffness E·w·t, N per unit strain.
    pub fn axial_stiffness(&self) -> f64 {
        self.elastic_modulus * self.width * self.thickness
    }
}

/// Ordinal surface roughness, smoothest first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoughnessRank {
    Metal,
    Acrylic,
    Wood,
}

impl RoughnessRank {
    pub fn ordinal(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubstrateSpec {
    pub name: String,
    /// Effective adhesion coefficient μ.
    pub mu: f64,
    /// Peel force per tape width from a 180° peel test, N/m.
    pub peel_force_per_width: f64,
    pub roughness_rank: RoughnessRank,
}

impl SubstrateSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("substrate {}: mu must be positive", self.name)));
        }
        if !(self.peel_force_per_width > 0.0 && self.peel_force_per_width.is_finite()) {
            return Err(Error::invalid(format!(
                "substrate {}: peel_force_per_width must be positive",
                self.name
            )));
        }
        Ok(())
    }
}

/// Rougher substrates must not adhere better than smoother ones.
pub fn validate_substrate_ordering(substrates: &[SubstrateSpec]) -> Result<()> {
    for a in substrates {
        for b in substrates {
            if a.roughness_rank > b.roughness_rank && a.peel_force_per_width > b.peel_force_per_width {
                return Err(Error::invalid(format!(
                    "substrate {} is rougher than {} but adheres more strongly",
                    a.name, b.name
                )));
            }
        }
    }
    Ok(())
}

/// Forces acting on the anchored run of tape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorState {
    /// Tape tension, N.
    pub tension: f64,
    /// Angle between the tension vector and the adhesion plane, rad.
    pub alpha: f64,
    /// Adhesion force of the anchored region, N.
    pub adhesion: f64,
    pub mu: f64,
}

impl AnchorState {
    pub fn validate(&self) -> Result<()> {
        if !(self.tension >= 0.0) {
            return Err(Error::invalid("tension must be non-negative"));
        }
        if !(0.0..=std::f64::consts::FRAC_PI_2 + 1e-12).contains(&self.alpha) {
            return Err(Error::invalid("alpha must lie in [0, π/2]"));
        }
        if !(self.adhesion >= 0.0) {
            return Err(Error::invalid("adhesion must be non-negative"));
        }
        if !(self.mu > 0.0) {
            return Err(Error::invalid("mu must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorCheck {
    pub feasible: bool,
    /// μ·F_adhesion − F_t·cos α
    pub shear_margin: f64,
    /// F_adhesion − F_t·sin α
    pub peel_margin: f64,
}

impl AnchorCheck {
    /// The failing condition with the most negative margin, if any.
    pub fn failure(&self) -> Option<AnchorFailure> {
        match (self.shear_margin < 0.0, self.peel_margin < 0.0) {
            (false, false) => None,
            (true, false) => Some(AnchorFailure::Shear),
            (false, true) => Some(AnchorFailure::Peel),
            (true, true) if self.shear_margin <= self.peel_margin => Some(AnchorFailure::Shear),
            _ => Some(AnchorFailure::Peel),
        }
    }
}

/// Both anchor conditions: `F_t cos α ≤ μ F_adh` and `F_t sin α ≤ F_adh`.
pub fn anchor_feasible(state: &AnchorState) -> AnchorCheck {
    let (sin, cos) = state.alpha.sin_cos();
    let shear_margin = state.mu * state.adhesion - state.tension * cos;
    let peel_margin = state.adhesion - state.tension * sin;
    AnchorCheck {
        feasible: shear_margin >= 0.0 && peel_margin >= 0.0,
        shear_margin,
        peel_margin,
    }
}

/// Peel strength in N per meter of width.
pub fn peel_strength(peel_force: f64, tape_width: f64) -> Result<f64> {
    if !(peel_force > 0.0) || !(tape_width > 0.0) {
        return Err(Error::invalid("peel force and tape width must be positive"));
    }
    Ok(peel_force / tape_width)
}

/// Adhesion of an anchored run, linear in the anchored length: the measured
/// peel force is spread over [`PEEL_REFERENCE_LENGTH`] of tape.
pub fn adhesion_from_peel(peel_force: f64, tape_width: f64, anchored_length: f64) -> Result<f64> {
    if !(peel_force > 0.0 && peel_force.is_finite()) || !(tape_width > 0.0 && tape_width.is_finite()) {
        return Err(Error::invalid("peel force and tape width must be positive"));
    }
    if !(anchored_length >= 0.0 && anchored_length.is_finite()) {
        return Err(Error::invalid("anchored length must be non-negative"));
    }
    Ok(peel_force / PEEL_REFERENCE_LENGTH * anchored_length)
}

/// Peel force of this tape on this substrate. The weaker of the adhesive's
/// own peel strength and the substrate's bond governs.
pub fn interface_peel_force(tape: &TapeSpec, substrate: &SubstrateSpec) -> f64 {
    tape.peel_strength.min(substrate.peel_force_per_width) * tape.width
}

/// Adhesion force per meter of anchored tape, N/m.
pub fn adhesion_per_length(tape: &TapeSpec, substrate: &SubstrateSpec) -> f64 {
    interface_peel_force(tape, substrate) / PEEL_REFERENCE_LENGTH
}

/// Shortest anchor for which both conditions hold, given adhesion per length.
pub fn min_anchor_length(tension: f64, alpha: f64, mu: f64, adhesion_per_length: f64) -> f64 {
    if tension <= 0.0 {
        return 0.0;
    }
    let (sin, cos) = alpha.sin_cos();
    let shear = tension * cos / (mu * adhesion_per_length);
    let peel = tension * sin / adhesion_per_length;
    shear.max(peel)
}

/// Tension from elastic strain of the span when the tool pulls faster than
/// the feeder dispenses. Never negative; capped at `cap`.
pub fn tension_estimate(pull_speed: f64, feed_speed: f64, span_length: f64, tape: &TapeSpec, cap: f64) -> Result<f64> {
    if !(span_length > 0.0) {
        return Err(Error::invalid("span length must be positive"));
    }
    if !(pull_speed >= 0.0) || !(feed_speed >= 0.0) {
        return Err(Error::invalid("speeds must be non-negative"));
    }
    if feed_speed >= pull_speed {
        return Ok(0.0);
    }
    let strain = (pull_speed - feed_speed) / feed_speed.max(MIN_FEED_SPEED);
    Ok((tape.axial_stiffness() * strain).min(cap))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WrinkleRisk {
    None,
    Warn,
    Fail,
}

/// Minimum radius scaled to a tape's width (narrow tapes bend tighter).
pub fn scaled_min_radius(min_radius: f64, tape: &TapeSpec) -> f64 {
    min_radius * tape.width / REFERENCE_TAPE_WIDTH
}

/// Fail below the width-scaled minimum radius, warn below twice it.
pub fn wrinkle_risk(radius: f64, tape: &TapeSpec, min_radius: f64) -> Result<WrinkleRisk> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let limit = scaled_min_radius(min_radius, tape);
    // relative slack absorbs round-off in radii computed from sampled paths
    let below = |r: f64, t: f64| r < t * (1.0 - 1e-9);
    Ok(if below(radius, limit) {
        WrinkleRisk::Fail
    } else if below(radius, 2.0 * limit) {
        WrinkleRisk::Warn
    } else {
        WrinkleRisk::None
    })
}

/// Relative placement deviation as a function of compaction force:
/// `1 + c·(F_c − 4)²`, equal to 1 at the 4 N optimum.
pub fn compaction_quality(force: f64) -> Result<f64> {
    compaction_quality_with(force, DEFAULT_COMPACTION_CURVATURE)
}

pub fn compaction_quality_with(force: f64, curvature: f64) -> Result<f64> {
    if !(force >= 0.0 && force.is_finite()) {
        return Err(Error::invalid(format!("compaction force must be non-negative, got {force}")));
    }
    let d = force - OPTIMAL_COMPACTION_FORCE;
    Ok(1.0 + curvature * d * d)
}

/// `R = ρ·L / (w·t)`
pub fn trace_resistance(length: f64, tape: &TapeSpec) -> Result<f64> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid("trace length must be positive"));
    }
    Ok(tape.resistivity * length / (tape.width * tape.thickness))
}
