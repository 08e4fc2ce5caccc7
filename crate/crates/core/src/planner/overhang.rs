use serde::{Deserialize, Serialize};

use super::{emit_program, insert_cut_events, MotionProgram, OverhangInfo, PlanParams, Strip};
use crate::error::{AnchorFailure, Error, Result};
use crate::geometry::{Point3, Surface};
use crate::mechanics::{
    adhesion_from_peel, anchor_feasible, interface_peel_force, min_anchor_length, tension_estimate, AnchorState,
    SubstrateSpec, TapeSpec,
};

/// Outcome of the anchor check for an overhang.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub alpha: f64,
    pub tension: f64,
    pub adhesion: f64,
    pub mu: f64,
    pub shear_margin: f64,
    pub peel_margin: f64,
    pub anchor_length: f64,
    pub min_anchor_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<AnchorFailure>,
}

/// Tension held by the span while the tool pulls at `speed`.
pub fn overhang_tension(tape: &TapeSpec, speed: f64, span_length: f64, params: &PlanParams) -> Result<f64> {
    let pull = speed * (1.0 + params.overhang_strain);
    tension_estimate(pull, speed, span_length.max(f64::MIN_POSITIVE), tape, params.tension_cap)
}

/// Anchor check for a straight span at elevation `alpha`.
pub fn overhang_feasibility(
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    alpha: f64,
    span_length: f64,
    anchor_length: f64,
    speed: f64,
    params: &PlanParams,
) -> Result<FeasibilityReport> {
    let tension = overhang_tension(tape, speed, span_length, params)?;
    let peel_force = interface_peel_force(tape, substrate);
    let adhesion = adhesion_from_peel(peel_force, tape.width, anchor_length)?;
    let check = anchor_feasible(&AnchorState {
        tension,
        alpha,
        adhesion,
        mu: substrate.mu,
    });
    let per_length = adhesion_from_peel(peel_force, tape.width, 1.0)?;
    Ok(FeasibilityReport {
        feasible: check.feasible,
        alpha,
        tension,
        adhesion,
        mu: substrate.mu,
        shear_margin: check.shear_margin,
        peel_margin: check.peel_margin,
        anchor_length,
        min_anchor_length: min_anchor_length(tension, alpha, substrate.mu, per_length),
        failure: check.failure(),
    })
}

fn push_run(points: &mut Vec<Point3>, to: Point3, step: f64) {
    let from = *points.last().unwrap();
    let len = from.distance(to);
    if len <= 1e-12 {
        return;
    }
    let n = ((len / step).ceil() as usize).max(1);
    for k in 1..=n {
        points.push(if k == n { to } else { from.lerp(to, k as f64 / n as f64) });
    }
}

/// Anchor run, straight chord to the raised surface, landing run.
#[allow(clippy::too_many_arguments)]
pub(crate) fn overhang_strip(
    source: usize,
    start: Point3,
    direction: Point3,
    height: f64,
    span: f64,
    anchor_length: f64,
    landing_length: f64,
    step: f64,
    speed: f64,
    params: &PlanParams,
) -> Result<Strip> {
    if !(height >= 0.0) || !(span > 0.0) {
        return Err(Error::invalid("overhang needs height ≥ 0 and span > 0"));
    }
    if !(anchor_length >= 0.0) {
        return Err(Error::invalid("anchor length must be non-negative"));
    }
    let dir = Point3::new(direction.x, direction.y, 0.0)
        .normalized()
        .ok_or_else(|| Error::invalid("overhang direction must have a horizontal component"))?;
    let mut points = vec![start];
    push_run(&mut points, start + dir * anchor_length, step);
    let anchor_end_index = points.len() - 1;
    let anchor_end = points[anchor_end_index];
    let top = anchor_end + dir * span + Point3::Z * height;
    push_run(&mut points, top, step);
    let span_end_index = points.len() - 1;
    push_run(&mut points, top + dir * landing_length, step);

    let span_length = anchor_end.distance(top);
    let planned_length = crate::geometry::polyline_length(&points);
    Ok(Strip {
        source,
        kind: "overhang".into(),
        layer: None,
        straight: false,
        closed: false,
        mode: super::Mode::Cartesian,
        speed,
        compaction_force: 0.0,
        normals: vec![Point3::Z; points.len()],
        points,
        surface: Surface::Plane {
            normal: Point3::Z,
            offset: start.z,
        },
        span: Some((anchor_end_index, span_end_index)),
        anchor_mark: (anchor_end_index > 0).then_some(anchor_end_index),
        overhang: Some(OverhangInfo {
            anchor_length,
            span_length,
            alpha: height.atan2(span),
            pull_speed: speed * (1.0 + params.overhang_strain),
            feed_speed: speed,
            anchor_end,
        }),
        planned_length,
    })
}

/// Program fragment and anchor report for an overhang, without rejecting
/// infeasible anchors.
pub fn overhang_fragment(
    start_surface: &SubstrateSpec,
    end_surface: &SubstrateSpec,
    gap: (f64, f64),
    tape: &TapeSpec,
    params: &PlanParams,
) -> Result<(MotionProgram, FeasibilityReport)> {
    params.validate()?;
    let (height, span) = gap;
    let strip = overhang_strip(
        0,
        Point3::ZERO,
        Point3::X,
        height,
        span,
        params.anchor_length,
        params.anchor_length.max(params.lead_in),
        crate::geometry::DEFAULT_SAMPLE_STEP,
        params.speed,
        params,
    )?;
    let info = strip.overhang.clone().unwrap();
    let report = overhang_feasibility(
        tape,
        start_surface,
        info.alpha,
        info.span_length,
        params.anchor_length,
        params.speed,
        params,
    )?;
    // adhesion is governed by the anchor surface; the landing surface only
    // needs to accept the tape
    end_surface.validate()?;
    let program = emit_program(&[strip], &tape.name, &start_surface.name, params);
    let program = insert_cut_events(program, params.cut_dwell)?;
    Ok((program, report))
}

/// Overhang fragment; fails with the required anchor length when the anchor
/// cannot hold the span tension.
pub fn plan_overhang(
    start_surface: &SubstrateSpec,
    end_surface: &SubstrateSpec,
    gap: (f64, f64),
    tape: &TapeSpec,
    params: &PlanParams,
) -> Result<(MotionProgram, FeasibilityReport)> {
    if !(params.anchor_length > 0.0) {
        return Err(Error::InfeasibleAnchor {
            feature: 0,
            anchor_length: params.anchor_length,
            required_anchor_length: overhang_fragment(start_surface, end_surface, gap, tape, params)?
                .1
                .min_anchor_length,
        });
    }
    let (program, report) = overhang_fragment(start_surface, end_surface, gap, tape, params)?;
    if !report.feasible {
        return Err(Error::InfeasibleAnchor {
            feature: 0,
            anchor_length: report.anchor_length,
            required_anchor_length: report.min_anchor_length,
        });
    }
    Ok((program, report))
}
