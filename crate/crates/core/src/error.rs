use serde::Serialize;
use thiserror::Error;

/// Which anchor inequality failed first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorFailure {
    /// Tangential pull exceeded the friction-like adhesion capacity.
    Shear,
    /// Normal pull exceeded the adhesion force.
    Peel,
}

impl std::fmt::Display for AnchorFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AnchorFailure::Shear => f.write_str("shear"),
            AnchorFailure::Peel => f.write_str("peel"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("path leaves the surface domain at {} arc position(s), first at {:.6} m", .arc_positions.len(), .arc_positions.first().copied().unwrap_or(f64::NAN))]
    OutOfDomain { arc_positions: Vec<f64> },

    #[error("conformal projection distorts path length by {distortion:.4} (limit {limit:.4})")]
    ExcessiveDistortion { distortion: f64, limit: f64 },

    #[error("curvature violation in feature {feature} at {arc_position:.6} m (radius {radius:.6} m)")]
    CurvatureViolation {
        feature: usize,
        arc_position: f64,
        radius: f64,
    },

    #[error("joint-limit violation in feature {feature} at {arc_position:.6} m: yaw travel {required:.4} rad exceeds {allowed:.4} rad")]
    JointLimitViolation {
        feature: usize,
        arc_position: f64,
        required: f64,
        allowed: f64,
    },

    #[error("workspace violation in feature {feature} at {arc_position:.6} m")]
    WorkspaceViolation { feature: usize, arc_position: f64 },

    #[error("infeasible anchor in feature {feature}: anchor {anchor_length:.6} m, required at least {required_anchor_length:.6} m")]
    InfeasibleAnchor {
        feature: usize,
        anchor_length: f64,
        required_anchor_length: f64,
    },

    #[error("placement failure in feature {feature} at {arc_position:.6} m: {mode}")]
    PlacementFailure {
        feature: usize,
        arc_position: f64,
        mode: String,
    },

    #[error("protocol violation at t={t:.6} s: {detail}")]
    ProtocolViolation { t: f64, detail: String },
}

impl Error {
    /// Stable kebab-case identifier used in machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InsufficientData(_) => "insufficient-data",
            Error::InvalidInput(_) => "invalid-input",
            Error::NotApplicable(_) => "not-applicable",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::ExcessiveDistortion { .. } => "excessive-distortion",
            Error::CurvatureViolation { .. } => "curvature-violation",
            Error::JointLimitViolation { .. } => "joint-limit-violation",
            Error::WorkspaceViolation { .. } => "workspace-violation",
            Error::InfeasibleAnchor { .. } => "infeasible-anchor",
            Error::PlacementFailure { .. } => "placement-failure",
            Error::ProtocolViolation { .. } => "protocol-violation",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
