//! JSON design schema.
//!
//! ```json
//! {
//!   "sample_step": 0.001,
//!   "features": [
//!     {"kind": "line", "start": [0, 0, 0], "end": [0.15, 0, 0]},
//!     {"kind": "wave", "amplitude": 0.01, "wavelength": 0.05, "total_length": 0.15},
//!     {"kind": "circle", "diameter": 0.1, "center": [0.2, 0, 0]},
//!     {"kind": "polygon", "vertices": [[0,0,0],[0.1,0,0],[0.1,0.1,0]], "closed": true,
//!      "corners": "segmented"},
//!     {"kind": "conformal",
//!      "surface": {"type": "hemisphere", "center": [0, 0, 0], "radius": 0.05},
//!      "path": {"kind": "line", "start": [-0.07, 0, 0], "end": [0.07, 0, 0]},
//!      "overrides": {"mode": "compaction", "compaction_force": 4.0}},
//!     {"kind": "layers", "base": {"kind": "line", "start": [0,0,0], "end": [0.05,0,0]},
//!      "layer_count": 4, "alternate_rotation": 1.5707963267948966},
//!     {"kind": "overhang", "start": [0, 0, 0], "height": 0.02, "span": 0.0346}
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use super::{
    fillet_polygon, gen_circle, gen_polygon, gen_wave, PathFeature, Point3, Surface, DEFAULT_SAMPLE_STEP,
};
use crate::error::{Error, Result};
use crate::planner::Mode;

fn default_step() -> f64 {
    DEFAULT_SAMPLE_STEP
}

fn default_direction() -> Point3 {
    Point3::X
}

/// How a polygon's turning vertices are printed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CornerMode {
    /// One uncut strip; sharp corners are curvature violations.
    #[default]
    Continuous,
    /// One uncut strip with corners rounded at the minimum radius.
    Fillet,
    /// Each edge is a separate strip, cut at every corner.
    Segmented,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub start: Point3,
    pub end: Point3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolygonSpec {
    pub vertices: Vec<Point3>,
    #[serde(default)]
    pub closed: bool,
    #[serde(default)]
    pub corners: CornerMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSpec {
    pub amplitude: f64,
    pub wavelength: f64,
    pub total_length: f64,
    #[serde(default)]
    pub origin: Point3,
    /// Rotation about +z applied around `origin`, radians.
    #[serde(default)]
    pub rotation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleSpec {
    pub diameter: f64,
    #[serde(default)]
    pub center: Point3,
}

/// Feature kinds that describe a single sampled path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathSpec {
    Line(LineSpec),
    Polygon(PolygonSpec),
    Wave(WaveSpec),
    Circle(CircleSpec),
}

impl PathSpec {
    pub fn corner_mode(&self) -> CornerMode {
        match self {
            PathSpec::Polygon(p) => p.corners,
            _ => CornerMode::Continuous,
        }
    }

    /// Samples the path. Polygon corners are kept sharp.
    pub fn build(&self, step: f64) -> Result<PathFeature> {
        match self {
            PathSpec::Line(l) => gen_polygon(&[l.start, l.end], false, step),
            PathSpec::Polygon(p) => gen_polygon(&p.vertices, p.closed, step),
            PathSpec::Wave(w) => {
                let base = gen_wave(w.amplitude, w.wavelength, w.total_length, step)?;
                Ok(base.rotated_z(Point3::ZERO, w.rotation).translated(w.origin))
            }
            PathSpec::Circle(c) => Ok(gen_circle(c.diameter, step)?.translated(c.center)),
        }
    }

    /// Samples the path with polygon corners rounded to `radius`.
    pub fn build_filleted(&self, step: f64, radius: f64) -> Result<PathFeature> {
        match self {
            PathSpec::Polygon(p) => fillet_polygon(&p.vertices, p.closed, radius, step),
            other => other.build(step),
        }
    }

    /// Individual straight edges, for segment-by-segment printing.
    pub fn edges(&self) -> Option<Vec<(Point3, Point3)>> {
        match self {
            PathSpec::Polygon(p) => {
                let mut v = p.vertices.clone();
                if p.closed {
                    v.push(v[0]);
                }
                Some(v.windows(2).map(|w| (w[0], w[1])).collect())
            }
            PathSpec::Line(l) => Some(vec![(l.start, l.end)]),
            _ => None,
        }
    }

    /// Nominally straight paths qualify for straightness measurement.
    pub fn is_straight(&self) -> bool {
        match self {
            PathSpec::Line(_) => true,
            PathSpec::Wave(w) => w.amplitude == 0.0,
            PathSpec::Polygon(p) => !p.closed && p.vertices.len() == 2,
            PathSpec::Circle(_) => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalSpec {
    pub surface: Surface,
    /// Path in the surface's parameter space (x, y used).
    pub path: PathSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayersSpec {
    pub base: PathSpec,
    pub layer_count: usize,
    /// Defaults to the tape thickness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer_height: Option<f64>,
    #[serde(default)]
    pub alternate_rotation: f64,
}

/// Anchor run, straight unsupported span up to a raised surface, landing run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverhangSpec {
    pub start: Point3,
    /// Horizontal travel direction.
    #[serde(default = "default_direction")]
    pub direction: Point3,
    pub height: f64,
    pub span: f64,
    /// Overrides the planner's anchor length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_length: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeatureSpec {
    Line(LineSpec),
    Polygon(PolygonSpec),
    Wave(WaveSpec),
    Circle(CircleSpec),
    Conformal(ConformalSpec),
    Layers(LayersSpec),
    Overhang(OverhangSpec),
}

impl FeatureSpec {
    pub fn as_path(&self) -> Option<PathSpec> {
        match self {
            FeatureSpec::Line(s) => Some(PathSpec::Line(s.clone())),
            FeatureSpec::Polygon(s) => Some(PathSpec::Polygon(s.clone())),
            FeatureSpec::Wave(s) => Some(PathSpec::Wave(s.clone())),
            FeatureSpec::Circle(s) => Some(PathSpec::Circle(s.clone())),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            FeatureSpec::Line(_) => "line",
            FeatureSpec::Polygon(_) => "polygon",
            FeatureSpec::Wave(_) => "wave",
            FeatureSpec::Circle(_) => "circle",
            FeatureSpec::Conformal(_) => "conformal",
            FeatureSpec::Layers(_) => "layers",
            FeatureSpec::Overhang(_) => "overhang",
        }
    }
}

/// Per-feature print parameter overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compaction_force: Option<f64>,
}

impl FeatureOverrides {
    fn is_empty(&self) -> bool {
        *self == FeatureOverrides::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignFeature {
    #[serde(flatten)]
    pub spec: FeatureSpec,
    #[serde(default, skip_serializing_if = "FeatureOverrides::is_empty")]
    pub overrides: FeatureOverrides,
}

impl From<FeatureSpec> for DesignFeature {
    fn from(spec: FeatureSpec) -> Self {
        DesignFeature {
            spec,
            overrides: FeatureOverrides::default(),
        }
    }
}

/// Ordered set of printable features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    #[serde(default = "default_step")]
    pub sample_step: f64,
    pub features: Vec<DesignFeature>,
}

impl Design {
    pub fn new(features: impl IntoIterator<Item = FeatureSpec>) -> Self {
        Design {
            sample_step: DEFAULT_SAMPLE_STEP,
            features: features.into_iter().map(DesignFeature::from).collect(),
        }
    }

    /// A single straight line along +x from the origin.
    pub fn straight_line(length: f64) -> Self {
        Design::new([FeatureSpec::Line(LineSpec {
            start: Point3::ZERO,
            end: Point3::new(length, 0.0, 0.0),
        })])
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.is_empty() {
            return Err(Error::invalid("design has no features"));
        }
        if !(self.sample_step > 0.0 && self.sample_step.is_finite()) {
            return Err(Error::invalid("sample_step must be positive"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let d: Design = serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("design JSON: {e}")))?;
        d.validate()?;
        Ok(d)
    }
}
