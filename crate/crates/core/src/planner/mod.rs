//! Compiles a [`Design`] into a [`MotionProgram`].
//!
//! Each design feature expands into one or more cut-delimited strips.
//! Strips are checked for bend radius and anchor feasibility, emitted as
//! timed steps, then decorated with feed/cut events and checked against the
//! robot's wrist range and workspace.

mod checks;
mod overhang;
mod program;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cumulative_lengths, expand_layers, polyline_length, project_conformal, ConformalPatch, CornerMode, Design,
    FeatureSpec, LayerStack, PathFeature, PathSpec, Point3, Surface, ToolPose,
};
use crate::mechanics::{SubstrateSpec, TapeSpec};

pub use checks::{
    check_curvature, check_joint_limits, check_workspace, fillet_radius, yaw_profile, CurvatureViolation,
    CurvatureViolationKind, JointViolation,
};
pub use overhang::{overhang_feasibility, overhang_fragment, overhang_tension, plan_overhang, FeasibilityReport};
pub use program::{
    FeatureInfo, Mode, MotionProgram, OverhangInfo, Phase, Step, StepEvent, PROGRAM_SCHEMA_VERSION,
};
pub(crate) use program::sha256_hex;

/// Print parameters. Operational constants (dwell, retract, travel speed)
/// are invented defaults and live here so they can be tuned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlanParams {
    /// Laying speed, m/s.
    pub speed: f64,
    pub mode: Mode,
    /// Normal force in compaction mode, N.
    pub compaction_force: f64,
    /// Minimum bend radius for the 6.35 mm reference tape.
    pub min_radius: f64,
    /// Anchored run before an overhang span.
    pub anchor_length: f64,
    /// Seam overlap for closed paths.
    pub lead_in: f64,
    pub speed_limits: (f64, f64),
    pub travel_speed: f64,
    pub retract_height: f64,
    /// Zero-velocity dwell while the blade cuts, s.
    pub cut_dwell: f64,
    /// Relative pull/feed mismatch while spanning an overhang.
    pub overhang_strain: f64,
    pub tension_cap: f64,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            speed: 0.025,
            mode: Mode::Cartesian,
            compaction_force: 4.0,
            min_radius: 0.025,
            anchor_length: 0.04,
            lead_in: 0.005,
            speed_limits: (0.010, 0.100),
            travel_speed: 0.100,
            retract_height: 0.010,
            cut_dwell: 1.0,
            overhang_strain: 1e-5,
            tension_cap: crate::mechanics::DEFAULT_TENSION_CAP,
        }
    }
}

impl PlanParams {
    pub fn validate(&self) -> Result<()> {
        self.validate_speed(self.speed)?;
        if !(self.compaction_force >= 0.0) {
            return Err(Error::invalid("compaction_force must be non-negative"));
        }
        if !(self.min_radius > 0.0) {
            return Err(Error::invalid("min_radius must be positive"));
        }
        if !(self.anchor_length >= 0.0) || !(self.lead_in >= 0.0) {
            return Err(Error::invalid("anchor_length and lead_in must be non-negative"));
        }
        for (name, v) in [
            ("travel_speed", self.travel_speed),
            ("retract_height", self.retract_height),
            ("cut_dwell", self.cut_dwell),
            ("tension_cap", self.tension_cap),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.overhang_strain >= 0.0) {
            return Err(Error::invalid("overhang_strain must be non-negative"));
        }
        Ok(())
    }

    fn validate_speed(&self, speed: f64) -> Result<()> {
        let (lo, hi) = self.speed_limits;
        if !(speed >= lo && speed <= hi) {
            return Err(Error::invalid(format!("speed {speed} m/s outside [{lo}, {hi}] m/s")));
        }
        Ok(())
    }
}

/// Axis-aligned box, meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn contains(&self, p: Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotLimits {
    /// Total allowed tool-yaw travel within one uncut strip, rad.
    pub wrist_rotation_range: f64,
    pub workspace: Aabb,
}

impl Default for RobotLimits {
    /// ±360° wrist and a box inside a 1.3 m reach arm.
    fn default() -> Self {
        RobotLimits {
            wrist_rotation_range: 4.0 * PI,
            workspace: Aabb {
                min: Point3::new(-1.3, -1.3, -0.5),
                max: Point3::new(1.3, 1.3, 1.3),
            },
        }
    }
}

/// One cut-delimited strip before timing.
#[derive(Clone, Debug)]
pub(crate) struct Strip {
    pub source: usize,
    pub kind: String,
    pub layer: Option<usize>,
    pub straight: bool,
    pub closed: bool,
    pub mode: Mode,
    pub speed: f64,
    pub compaction_force: f64,
    pub points: Vec<Point3>,
    /// Outward surface normal per point.
    pub normals: Vec<Point3>,
    pub surface: Surface,
    /// Sample index range `(start, end]` of an unsupported span.
    pub span: Option<(usize, usize)>,
    pub anchor_mark: Option<usize>,
    pub overhang: Option<OverhangInfo>,
    pub planned_length: f64,
}

/// Extends a closed loop past its seam by `lead` so the ends overlap.
fn extend_closed(points: &mut Vec<Point3>, lead: f64) {
    if lead <= 0.0 || points.len() < 3 {
        return;
    }
    let loop_pts = points.clone();
    let mut acc = 0.0;
    for w in loop_pts.windows(2) {
        let d = w[0].distance(w[1]);
        if acc + d >= lead {
            let t = (lead - acc) / d;
            if t > 1e-9 {
                points.push(w[0].lerp(w[1], t));
            }
            return;
        }
        acc += d;
        points.push(w[1]);
    }
}

struct StripTemplate {
    path: PathFeature,
    straight: bool,
}

/// Splits a path spec into strips according to its corner mode, after the
/// bend-radius check.
fn path_strips(
    spec: &PathSpec,
    step: f64,
    tape: &TapeSpec,
    params: &PlanParams,
    source: usize,
) -> Result<Vec<StripTemplate>> {
    let corners = spec.corner_mode();
    let raw = spec.build(step)?;
    let checked = match corners {
        CornerMode::Fillet => spec.build_filleted(step, fillet_radius(tape, params.min_radius))?,
        _ => raw.clone(),
    };
    if let Some(v) = check_curvature(&checked, tape, params.min_radius, corners).first() {
        return Err(Error::CurvatureViolation {
            feature: source,
            arc_position: v.start,
            radius: v.min_radius,
        });
    }
    Ok(match corners {
        CornerMode::Segmented => spec
            .edges()
            .unwrap_or_default()
            .into_iter()
            .map(|(a, b)| {
                Ok(StripTemplate {
                    path: crate::geometry::gen_polygon(&[a, b], false, step)?,
                    straight: true,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        _ => vec![StripTemplate {
            path: checked,
            straight: spec.is_straight(),
        }],
    })
}

fn planar_surface(z: f64) -> Surface {
    Surface::Plane {
        normal: Point3::Z,
        offset: z,
    }
}

/// Expands every design feature into printable strips.
pub(crate) fn expand_design(design: &Design, tape: &TapeSpec, params: &PlanParams) -> Result<Vec<Strip>> {
    design.validate()?;
    let step = design.sample_step;
    let mut strips = Vec::new();
    for (source, feature) in design.features.iter().enumerate() {
        let speed = feature.overrides.speed.unwrap_or(params.speed);
        params.validate_speed(speed)?;
        let mode = feature.overrides.mode.unwrap_or(params.mode);
        let force = feature.overrides.compaction_force.unwrap_or(params.compaction_force);
        if !(force >= 0.0) {
            return Err(Error::invalid("compaction_force must be non-negative"));
        }
        let compaction_force = if mode == Mode::Compaction { force } else { 0.0 };
        let make = |points: Vec<Point3>, normals: Vec<Point3>, surface, straight, closed, layer| {
            let mut points = points;
            let mut normals = normals;
            if closed {
                extend_closed(&mut points, params.lead_in);
                let n = *normals.last().unwrap_or(&Point3::Z);
                normals.resize(points.len(), n);
            }
            let planned_length = polyline_length(&points);
            Strip {
                source,
                kind: feature.spec.kind_name().into(),
                layer,
                straight,
                closed,
                mode,
                speed,
                compaction_force,
                normals,
                points,
                surface,
                span: None,
                anchor_mark: None,
                overhang: None,
                planned_length,
            }
        };

        match &feature.spec {
            FeatureSpec::Conformal(c) => {
                for t in path_strips(&c.path, step, tape, params, source)? {
                    let proj = project_conformal(
                        &ConformalPatch {
                            surface: c.surface,
                            path2d: t.path.clone(),
                        },
                        step,
                    )
                    .map_err(|e| match e {
                        Error::OutOfDomain { arc_positions } => Error::OutOfDomain { arc_positions },
                        other => other,
                    })?;
                    let points: Vec<Point3> = proj.poses.iter().map(|p| p.position).collect();
                    let normals = proj.poses.iter().map(|p| -p.approach).collect();
                    strips.push(make(points, normals, c.surface, t.straight && matches!(c.surface, Surface::Plane { .. }), t.path.closed, None));
                }
            }
            FeatureSpec::Layers(l) => {
                let height = l.layer_height.unwrap_or(tape.thickness);
                for t in path_strips(&l.base, step, tape, params, source)? {
                    let stack = LayerStack {
                        base: t.path.clone(),
                        layer_count: l.layer_count,
                        layer_height: height,
                        alternate_rotation: l.alternate_rotation,
                    };
                    for (k, (path, z, _)) in expand_layers(&stack)?.into_iter().enumerate() {
                        let z_level = path.samples[0].z;
                        let n = path.samples.len();
                        let _ = z;
                        strips.push(make(path.samples, vec![Point3::Z; n], planar_surface(z_level), t.straight, path.closed, Some(k)));
                    }
                }
            }
            FeatureSpec::Overhang(o) => {
                let anchor = o.anchor_length.unwrap_or(params.anchor_length);
                let mut s = overhang::overhang_strip(
                    source,
                    o.start,
                    o.direction,
                    o.height,
                    o.span,
                    anchor,
                    anchor.max(params.lead_in),
                    step,
                    speed,
                    params,
                )?;
                s.mode = mode;
                s.compaction_force = compaction_force;
                strips.push(s);
            }
            other => {
                let spec = other.as_path().expect("remaining kinds are paths");
                for t in path_strips(&spec, step, tape, params, source)? {
                    let n = t.path.samples.len();
                    let z = t.path.samples[0].z;
                    strips.push(make(t.path.samples, vec![Point3::Z; n], planar_surface(z), t.straight, t.path.closed, None));
                }
            }
        }
    }
    Ok(strips)
}

fn approach_for(mode: Mode, normal: Point3) -> Point3 {
    match mode {
        Mode::Cartesian => -Point3::Z,
        Mode::Compaction => -normal,
    }
}

fn travel_dir(points: &[Point3], i: usize) -> Point3 {
    let n = points.len();
    let (a, b) = if n < 2 {
        return Point3::X;
    } else if i == 0 {
        (0, 1)
    } else if i + 1 >= n {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    points[b] - points[a]
}

/// Timed steps for the strips, without feed/cut events.
pub(crate) fn emit_program(strips: &[Strip], tape_ref: &str, substrate_ref: &str, params: &PlanParams) -> MotionProgram {
    let mut steps: Vec<Step> = Vec::new();
    let mut features = Vec::with_capacity(strips.len());
    let mut t = 0.0;
    for (f, strip) in strips.iter().enumerate() {
        let pose_at = |i: usize| {
            ToolPose::new(
                strip.points[i],
                approach_for(strip.mode, strip.normals[i]),
                travel_dir(&strip.points, i),
            )
        };
        let first = pose_at(0);
        let above = ToolPose {
            position: first.position - first.approach * params.retract_height,
            ..first
        };
        match steps.last() {
            None => steps.push(Step {
                t,
                pose: above,
                speed: 0.0,
                compaction_setpoint: 0.0,
                event: StepEvent::None,
                feature: f,
                phase: Phase::Travel,
            }),
            Some(prev) => {
                let dist = prev.pose.position.distance(above.position);
                // at least a short reorientation move between strips
                t += (dist / params.travel_speed).max(params.retract_height / params.travel_speed);
                steps.push(Step {
                    t,
                    pose: above,
                    speed: params.travel_speed,
                    compaction_setpoint: 0.0,
                    event: StepEvent::None,
                    feature: f,
                    phase: Phase::Travel,
                });
            }
        }
        t += params.retract_height / strip.speed;
        steps.push(Step {
            t,
            pose: first,
            speed: strip.speed,
            compaction_setpoint: 0.0,
            event: StepEvent::None,
            feature: f,
            phase: Phase::Approach,
        });
        for i in 1..strip.points.len() {
            t += strip.points[i - 1].distance(strip.points[i]) / strip.speed;
            let on_span = strip.span.is_some_and(|(a, b)| i > a && i <= b);
            steps.push(Step {
                t,
                pose: pose_at(i),
                speed: strip.speed,
                compaction_setpoint: if on_span { 0.0 } else { strip.compaction_force },
                event: if strip.anchor_mark == Some(i) {
                    StepEvent::AnchorMark
                } else {
                    StepEvent::None
                },
                feature: f,
                phase: if on_span { Phase::Span } else { Phase::Lay },
            });
        }
        let last = pose_at(strip.points.len() - 1);
        t += params.retract_height / strip.speed;
        steps.push(Step {
            t,
            pose: ToolPose {
                position: last.position - last.approach * params.retract_height,
                ..last
            },
            speed: strip.speed,
            compaction_setpoint: 0.0,
            event: StepEvent::None,
            feature: f,
            phase: Phase::Retract,
        });
        features.push(FeatureInfo {
            source: strip.source,
            kind: strip.kind.clone(),
            layer: strip.layer,
            straight: strip.straight,
            closed: strip.closed,
            mode: strip.mode,
            speed: strip.speed,
            compaction_force: strip.compaction_force,
            planned_length: strip.planned_length,
            surface: strip.surface,
            overhang: strip.overhang.clone(),
        });
    }
    let mode = strips.first().map_or(params.mode, |s| s.mode);
    MotionProgram {
        schema_version: PROGRAM_SCHEMA_VERSION,
        tape_ref: tape_ref.to_string(),
        substrate_ref: substrate_ref.to_string(),
        mode,
        features,
        steps,
    }
}

/// Marks feed start on each strip's landing step, feed stop on its last
/// laying step, and inserts a zero-velocity cut dwell after it.
pub fn insert_cut_events(program: MotionProgram, cut_dwell: f64) -> Result<MotionProgram> {
    if !(cut_dwell > 0.0) {
        return Err(Error::invalid("cut dwell must be positive"));
    }
    if program
        .steps
        .iter()
        .any(|s| !matches!(s.event, StepEvent::None | StepEvent::AnchorMark))
    {
        return Err(Error::InvalidInput("program already carries feed/cut events".into()));
    }
    let mut first_lay = vec![None; program.features.len()];
    let mut last_lay = vec![None; program.features.len()];
    for (i, s) in program.steps.iter().enumerate() {
        if s.phase.is_laying() {
            first_lay[s.feature].get_or_insert(i);
            last_lay[s.feature] = Some(i);
        }
    }
    let mut steps = Vec::with_capacity(program.steps.len() + program.features.len());
    let mut shift = 0.0;
    for (i, s) in program.steps.into_iter().enumerate() {
        let mut s = Step { t: s.t + shift, ..s };
        let f = s.feature;
        if first_lay[f] == Some(i + 1) {
            s.event = StepEvent::FeedStart;
        }
        let stop = last_lay[f] == Some(i);
        if stop {
            s.event = StepEvent::FeedStop;
        }
        let cut_pose = s.pose;
        let t = s.t;
        steps.push(s);
        if stop {
            shift += cut_dwell;
            steps.push(Step {
                t: t + cut_dwell,
                pose: cut_pose,
                speed: 0.0,
                compaction_setpoint: 0.0,
                event: StepEvent::Cut,
                feature: f,
                phase: Phase::Dwell,
            });
        }
    }
    Ok(MotionProgram { steps, ..program })
}

/// Compiles a design into a motion program.
pub fn plan(
    design: &Design,
    tape: &TapeSpec,
    substrate: &SubstrateSpec,
    params: &PlanParams,
    limits: &RobotLimits,
) -> Result<MotionProgram> {
    tape.validate()?;
    substrate.validate()?;
    params.validate()?;
    if !(limits.wrist_rotation_range > 0.0) {
        return Err(Error::invalid("wrist_rotation_range must be positive"));
    }
    let strips = expand_design(design, tape, params)?;

    for s in &strips {
        if let Some(o) = &s.overhang {
            let report = overhang_feasibility(tape, substrate, o.alpha, o.span_length, o.anchor_length, s.speed, params)?;
            if !report.feasible {
                return Err(Error::InfeasibleAnchor {
                    feature: s.source,
                    anchor_length: o.anchor_length,
                    required_anchor_length: report.min_anchor_length,
                });
            }
        }
    }

    let program = emit_program(&strips, &tape.name, &substrate.name, params);
    let program = insert_cut_events(program, params.cut_dwell)?;

    if let Some(v) = check_joint_limits(&program, limits).first() {
        return Err(Error::JointLimitViolation {
            feature: program.features[v.feature].source,
            arc_position: v.arc_position,
            required: v.required,
            allowed: v.allowed,
        });
    }
    if let Some(&(f, step)) = check_workspace(&program, limits).first() {
        let laid = program.laid_steps(f);
        let pts: Vec<Point3> = laid.iter().map(|&i| program.steps[i].pose.position).collect();
        let arc = cumulative_lengths(&pts);
        let arc_position = laid
            .iter()
            .position(|&i| i >= step)
            .map_or(0.0, |k| arc[k.min(arc.len() - 1)]);
        return Err(Error::WorkspaceViolation {
            feature: program.features[f].source,
            arc_position,
        });
    }
    program.validate()?;
    Ok(program)
}
