use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Surface, ToolPose};

/// Current version of the motion program JSON layout.
pub const PROGRAM_SCHEMA_VERSION: u32 = 1;

/// Toolpath mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Point-to-point positions, tool axis fixed to −z, no force regulation.
    #[default]
    Cartesian,
    /// Tool axis along the inward surface normal with a regulated normal force.
    Compaction,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(Mode::Cartesian),
            "compaction" => Ok(Mode::Compaction),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepEvent {
    #[default]
    None,
    FeedStart,
    FeedStop,
    Cut,
    AnchorMark,
}

/// What the tool is doing while it moves to a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Travel,
    Approach,
    Lay,
    /// Unsupported tape span of an overhang.
    Span,
    Dwell,
    Retract,
}

impl Phase {
    pub fn is_laying(self) -> bool {
        matches!(self, Phase::Lay | Phase::Span)
    }
}

/// One timed waypoint. `speed` is the tool speed used to reach this step from
/// the previous one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub t: f64,
    pub pose: ToolPose,
    pub speed: f64,
    pub compaction_setpoint: f64,
    pub event: StepEvent,
    pub feature: usize,
    pub phase: Phase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverhangInfo {
    pub anchor_length: f64,
    pub span_length: f64,
    /// Elevation of the span above the anchor plane, rad.
    pub alpha: f64,
    pub pull_speed: f64,
    pub feed_speed: f64,
    pub anchor_end: Point3,
}

/// Metadata for one printed (cut-delimited) feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureInfo {
    /// Index of the design feature this strip came from.
    pub source: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    pub straight: bool,
    pub closed: bool,
    pub mode: Mode,
    pub speed: f64,
    pub compaction_force: f64,
    /// Laid length including any seam overlap.
    pub planned_length: f64,
    pub surface: Surface,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overhang: Option<OverhangInfo>,
}

/// Timed tool program, the compiler's output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionProgram {
    pub schema_version: u32,
    pub tape_ref: String,
    pub substrate_ref: String,
    pub mode: Mode,
    pub features: Vec<FeatureInfo>,
    pub steps: Vec<Step>,
}

impl MotionProgram {
    pub fn duration(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.t)
    }

    /// Step indices of the tape on the substrate for `feature`: the landing
    /// step followed by every laying step.
    pub fn laid_steps(&self, feature: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, s) in self.steps.iter().enumerate() {
            if s.feature == feature && s.phase.is_laying() {
                if out.is_empty() && i > 0 {
                    out.push(i - 1);
                }
                out.push(i);
            }
        }
        out
    }

    pub fn laid_positions(&self, feature: usize) -> Vec<Point3> {
        self.laid_steps(feature)
            .into_iter()
            .map(|i| self.steps[i].pose.position)
            .collect()
    }

    /// Time spent on laying steps of `feature`.
    pub fn laying_time(&self, feature: usize) -> f64 {
        self.laid_steps(feature)
            .windows(2)
            .map(|w| self.steps[w[1]].t - self.steps[w[0]].t)
            .sum()
    }

    pub fn count_events(&self, event: StepEvent) -> usize {
        self.steps.iter().filter(|s| s.event == event).count()
    }

    /// Checks timing, continuity and event invariants.
    pub fn validate(&self) -> Result<()> {
        self.validate_motion()?;
        self.validate_events()
    }

    /// Timing, continuity and pose checks only; event ordering is left to the
    /// consumer.
    pub fn validate_motion(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.steps.is_empty() {
            return bad("program has no steps".into());
        }
        for (i, w) in self.steps.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if !(dt > 0.0) {
                return bad(format!("time not strictly increasing at step {}", i + 1));
            }
            let gap = w[0].pose.position.distance(w[1].pose.position);
            if gap > w[1].speed * dt * 1.01 + 1e-12 {
                return bad(format!("pose jump of {gap} m at step {}", i + 1));
            }
        }
        for (i, s) in self.steps.iter().enumerate() {
            if !s.pose.is_valid() {
                return bad(format!("invalid pose at step {i}"));
            }
            if s.feature >= self.features.len() {
                return bad(format!("step {i} references unknown feature {}", s.feature));
            }
        }
        Ok(())
    }

    fn validate_events(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        for f in 0..self.features.len() {
            let of = |e: StepEvent| {
                self.steps
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.feature == f && s.event == e)
                    .map(|(i, _)| i)
                    .collect::<Vec<_>>()
            };
            let (starts, stops, cuts) = (of(StepEvent::FeedStart), of(StepEvent::FeedStop), of(StepEvent::Cut));
            if cuts.len() != 1 || starts.len() != 1 || stops.len() != 1 {
                return bad(format!(
                    "feature {f} needs exactly one feed_start/feed_stop/cut, has {}/{}/{}",
                    starts.len(),
                    stops.len(),
                    cuts.len()
                ));
            }
            let laid = self.laid_steps(f);
            if laid.len() < 2 {
                return bad(format!("feature {f} has no laying motion"));
            }
            if starts[0] > laid[0] || stops[0] != *laid.last().unwrap() || cuts[0] < stops[0] {
                return bad(format!("feature {f} events out of order"));
            }
        }
        Ok(())
    }

    /// Serialized form; byte-identical for identical programs.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: MotionProgram =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("program JSON: {e}")))?;
        if p.schema_version != PROGRAM_SCHEMA_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported program schema_version {}",
                p.schema_version
            )));
        }
        Ok(p)
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("serializable").as_bytes())
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
