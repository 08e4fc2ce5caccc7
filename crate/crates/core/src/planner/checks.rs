use serde::{Deserialize, Serialize};

use super::{MotionProgram, RobotLimits};
use crate::geometry::{cumulative_lengths, curvature_profile, CornerMode, PathFeature, Point3};
use crate::mechanics::{scaled_min_radius, wrinkle_risk, TapeSpec, WrinkleRisk};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureViolationKind {
    Radius,
    Corner,
}

/// A contiguous stretch of path bent tighter than the tape allows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureViolation {
    pub kind: CurvatureViolationKind,
    pub start: f64,
    pub end: f64,
    /// Smallest radius in the stretch (0 for corners).
    pub min_radius: f64,
}

/// Stretches where the path radius drops below the tape's (width-scaled)
/// minimum radius. Sharp corners count unless the path is printed
/// segment-by-segment.
pub fn check_curvature(
    path: &PathFeature,
    tape: &TapeSpec,
    min_radius: f64,
    corners: CornerMode,
) -> Vec<CurvatureViolation> {
    let profile = match curvature_profile(path) {
        Ok(p) => p,
        Err(_) => return Vec::new(),
    };
    let mut out: Vec<CurvatureViolation> = Vec::new();
    let mut open: Option<CurvatureViolation> = None;
    for c in &profile {
        if c.curvature.is_infinite() {
            if let Some(v) = open.take() {
                out.push(v);
            }
            if corners != CornerMode::Segmented {
                out.push(CurvatureViolation {
                    kind: CurvatureViolationKind::Corner,
                    start: c.arc_position,
                    end: c.arc_position,
                    min_radius: 0.0,
                });
            }
            continue;
        }
        let radius = if c.curvature > 0.0 { 1.0 / c.curvature } else { f64::INFINITY };
        let fails = wrinkle_risk(radius, tape, min_radius).is_ok_and(|r| r == WrinkleRisk::Fail);
        match (&mut open, fails) {
            (Some(v), true) => {
                v.end = c.arc_position;
                v.min_radius = v.min_radius.min(radius);
            }
            (None, true) => {
                open = Some(CurvatureViolation {
                    kind: CurvatureViolationKind::Radius,
                    start: c.arc_position,
                    end: c.arc_position,
                    min_radius: radius,
                })
            }
            (Some(_), false) => out.push(open.take().unwrap()),
            (None, false) => {}
        }
    }
    if let Some(v) = open {
        out.push(v);
    }
    // closed paths: a stretch running through the seam is one violation
    if path.closed && out.len() > 1 {
        let first = out[0];
        let last = *out.last().unwrap();
        let seam_first = first.kind == CurvatureViolationKind::Radius && first.start == profile[0].arc_position;
        let seam_last = last.kind == CurvatureViolationKind::Radius && last.end == profile.last().unwrap().arc_position;
        if seam_first && seam_last {
            out.pop();
            out[0] = CurvatureViolation {
                kind: CurvatureViolationKind::Radius,
                start: last.start,
                end: first.end,
                min_radius: first.min_radius.min(last.min_radius),
            };
        }
    }
    out
}

/// Effective minimum radius for a tape, for filleting.
pub fn fillet_radius(tape: &TapeSpec, min_radius: f64) -> f64 {
    scaled_min_radius(min_radius, tape)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointViolation {
    pub feature: usize,
    /// Arc position at which the allowed wrist travel is first exceeded.
    pub arc_position: f64,
    /// Total yaw travel the feature needs, rad.
    pub required: f64,
    pub allowed: f64,
}

/// Unwrapped tool yaw (rotation of the heading about the approach axis) at
/// each laid step of a feature, with arc positions.
pub fn yaw_profile(program: &MotionProgram, feature: usize) -> Vec<(f64, f64)> {
    let steps = program.laid_steps(feature);
    let positions: Vec<Point3> = steps.iter().map(|&i| program.steps[i].pose.position).collect();
    let arc = cumulative_lengths(&positions);
    let mut yaw = 0.0;
    let mut out = Vec::with_capacity(steps.len());
    for (k, &i) in steps.iter().enumerate() {
        if k > 0 {
            let prev = &program.steps[steps[k - 1]].pose;
            let cur = &program.steps[i].pose;
            let a = prev.approach;
            let h = cur.heading - a * cur.heading.dot(a);
            yaw += prev.heading.cross(h).dot(a).atan2(prev.heading.dot(h));
        }
        out.push((arc[k], yaw));
    }
    out
}

/// Features whose wrist yaw range exceeds the robot's rotation range.
pub fn check_joint_limits(program: &MotionProgram, limits: &RobotLimits) -> Vec<JointViolation> {
    let mut out = Vec::new();
    for f in 0..program.features.len() {
        let profile = yaw_profile(program, f);
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let mut first_exceed = None;
        for &(s, y) in &profile {
            lo = lo.min(y);
            hi = hi.max(y);
            if first_exceed.is_none() && hi - lo > limits.wrist_rotation_range {
                first_exceed = Some(s);
            }
        }
        if let Some(arc_position) = first_exceed {
            out.push(JointViolation {
                feature: f,
                arc_position,
                required: hi - lo,
                allowed: limits.wrist_rotation_range,
            });
        }
    }
    out
}

/// `(feature, step index)` of every pose outside the workspace box.
pub fn check_workspace(program: &MotionProgram, limits: &RobotLimits) -> Vec<(usize, usize)> {
    program
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| !limits.workspace.contains(s.pose.position))
        .map(|(i, s)| (s.feature, i))
        .collect()
}
