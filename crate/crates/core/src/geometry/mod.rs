//! Design vocabulary: points, tool poses, sampled path features and the
//! generators that produce them.
//!
//! All lengths are meters. A [`PathFeature`] is always a dense polyline; the
//! generators choose their sample counts so that no chord exceeds the
//! requested `sample_step`.

mod conformal;
mod design;
mod generators;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use conformal::{
    project_conformal, project_conformal_with_limit, ConformalPatch, ConformalProjection, Surface, MAX_DISTORTION,
};
pub use design::{
    CircleSpec, ConformalSpec, CornerMode, Design, DesignFeature, FeatureOverrides, FeatureSpec, LayersSpec,
    LineSpec, OverhangSpec, PathSpec, PolygonSpec, WaveSpec,
};
pub use generators::{
    expand_layers, fillet_polygon, gen_circle, gen_polygon, gen_wave, LayerStack, DEFAULT_SAMPLE_STEP,
};

/// Tolerance used when comparing coincident points.
pub const POINT_EPS: f64 = 1e-9;

/// A point (or vector) in world coordinates, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Point3 {
    pub const ZERO: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Point3 = Point3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Point3 = Point3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Point3 = Point3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Point3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero vectors.
    pub fn normalized(self) -> Option<Point3> {
        let n = self.norm();
        (n > 1e-15 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn lerp(self, o: Point3, t: f64) -> Point3 {
        self + (o - self) * t
    }

    /// Rotation about the z axis through `pivot`.
    pub fn rotate_z(self, pivot: Point3, angle: f64) -> Point3 {
        let (s, c) = angle.sin_cos();
        let d = self - pivot;
        pivot + Point3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z)
    }

    /// Some unit vector orthogonal to `self` (assumed non-zero).
    pub fn any_orthogonal(self) -> Point3 {
        let pick = if self.x.abs() < 0.9 { Point3::X } else { Point3::Y };
        self.cross(pick).normalized().unwrap_or(Point3::Y)
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Point3 {
    fn add_assign(&mut self, o: Point3) {
        *self = *self + o;
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Tool position plus orientation.
///
/// `approach` is the tool z-axis and points into the substrate; `heading` is
/// the tape travel direction and is kept orthogonal to `approach`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolPose {
    pub position: Point3,
    pub approach: Point3,
    pub heading: Point3,
}

impl ToolPose {
    /// Builds a pose, orthonormalising `heading` against `approach`.
    ///
    /// When the travel direction is parallel to the approach axis an arbitrary
    /// orthogonal heading is used.
    pub fn new(position: Point3, approach: Point3, travel: Point3) -> Self {
        let approach = approach.normalized().unwrap_or(-Point3::Z);
        let heading = (travel - approach * travel.dot(approach))
            .normalized()
            .unwrap_or_else(|| approach.any_orthogonal());
        ToolPose {
            position,
            approach,
            heading,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite()
            && (self.approach.norm() - 1.0).abs() <= 1e-9
            && (self.heading.norm() - 1.0).abs() <= 1e-9
            && self.approach.dot(self.heading).abs() <= 1e-9
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    SegmentChain,
    Arc,
    Circle,
    Wave,
}

/// A dense sampled polyline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathFeature {
    pub kind: PathKind,
    pub samples: Vec<Point3>,
    pub closed: bool,
    pub sample_step: f64,
    /// Sample indices that are sharp polygon vertices.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub corners: Vec<usize>,
}

impl PathFeature {
    /// Checks the structural invariants of a sampled path.
    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(Error::invalid("path needs at least 2 samples"));
        }
        if !(self.sample_step > 0.0) {
            return Err(Error::invalid("sample_step must be positive"));
        }
        for (i, w) in self.samples.windows(2).enumerate() {
            if !w[0].is_finite() || !w[1].is_finite() {
                return Err(Error::invalid(format!("non-finite sample near index {i}")));
            }
            let d = w[0].distance(w[1]);
            if d <= POINT_EPS {
                return Err(Error::invalid(format!("duplicate consecutive samples at index {i}")));
            }
            if d > self.sample_step * (1.0 + 1e-9) {
                return Err(Error::invalid(format!(
                    "sample spacing {d} exceeds sample_step {} at index {i}",
                    self.sample_step
                )));
            }
        }
        if self.closed {
            let first = self.samples[0];
            let last = *self.samples.last().unwrap();
            if first.distance(last) > POINT_EPS {
                return Err(Error::invalid("closed path must end where it starts"));
            }
        }
        Ok(())
    }

    pub fn arc_length(&self) -> f64 {
        polyline_length(&self.samples)
    }

    /// Cumulative arc position of every sample.
    pub fn arc_positions(&self) -> Vec<f64> {
        cumulative_lengths(&self.samples)
    }

    pub fn translated(&self, offset: Point3) -> PathFeature {
        PathFeature {
            samples: self.samples.iter().map(|&p| p + offset).collect(),
            ..self.clone()
        }
    }

    /// Centroid of the distinct samples (the closing duplicate is skipped).
    pub fn centroid(&self) -> Point3 {
        let n = if self.closed { self.samples.len() - 1 } else { self.samples.len() };
        let sum = self.samples[..n].iter().fold(Point3::ZERO, |a, &p| a + p);
        sum * (1.0 / n as f64)
    }

    pub fn rotated_z(&self, pivot: Point3, angle: f64) -> PathFeature {
        PathFeature {
            samples: self.samples.iter().map(|p| p.rotate_z(pivot, angle)).collect(),
            ..self.clone()
        }
    }

    /// Re-samples the path at uniform arc-length spacing no larger than `step`.
    ///
    /// Corner samples are kept so sharp vertices survive resampling.
    pub fn resampled(&self, step: f64) -> Result<PathFeature> {
        if !(step > 0.0) {
            return Err(Error::invalid("resample step must be positive"));
        }
        let mut keep: Vec<usize> = self.corners.clone();
        keep.push(0);
        keep.push(self.samples.len() - 1);
        keep.sort_unstable();
        keep.dedup();

        let mut samples = vec![self.samples[0]];
        let mut corners = Vec::new();
        for w in keep.windows(2) {
            let piece = &self.samples[w[0]..=w[1]];
            let cum = cumulative_lengths(piece);
            let total = *cum.last().unwrap();
            let n = ((total / step).ceil() as usize).max(1);
            let mut seg = 0;
            for k in 1..=n {
                let s = total * k as f64 / n as f64;
                if k == n {
                    samples.push(*piece.last().unwrap());
                    break;
                }
                while seg + 1 < cum.len() - 1 && cum[seg + 1] < s {
                    seg += 1;
                }
                let span = cum[seg + 1] - cum[seg];
                let t = if span > 0.0 { (s - cum[seg]) / span } else { 0.0 };
                samples.push(piece[seg].lerp(piece[seg + 1], t));
            }
            if self.corners.contains(&w[1]) {
                corners.push(samples.len() - 1);
            }
        }
        if self.corners.contains(&0) {
            corners.insert(0, 0);
        }
        Ok(PathFeature {
            kind: self.kind,
            samples,
            closed: self.closed,
            sample_step: step,
            corners,
        })
    }
}

pub fn polyline_length(points: &[Point3]) -> f64 {
    points.windows(2).map(|w| w[0].distance(w[1])).sum()
}

pub fn cumulative_lengths(points: &[Point3]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].distance(w[1]);
        out.push(acc);
    }
    out
}

/// Curvature (1/R) of the circle through three points; 0 for collinear points.
pub fn circumcurvature(a: Point3, b: Point3, c: Point3) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ca = a - c;
    let denom = ab.norm() * bc.norm() * ca.norm();
    if denom <= 0.0 {
        return 0.0;
    }
    // 1/R = 4·area / (|ab||bc||ca|) and |ab × bc| = 2·area
    2.0 * ab.cross(bc).norm() / denom
}

/// One entry of a curvature profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub arc_position: f64,
    /// `f64::INFINITY` marks a sharp polygon corner.
    pub curvature: f64,
}

/// Discrete curvature from circumscribed circles of consecutive sample triples.
///
/// Open paths report interior samples only. Closed paths report every distinct
/// sample, wrapping across the seam.
pub fn curvature_profile(path: &PathFeature) -> Result<Vec<CurvatureSample>> {
    let pts = &path.samples;
    if pts.len() < 3 {
        return Err(Error::InsufficientData(
            "curvature needs at least 3 samples".into(),
        ));
    }
    let arc = cumulative_lengths(pts);
    let mut out = Vec::with_capacity(pts.len());
    let is_corner = |i: usize| path.corners.contains(&i);
    if path.closed {
        let n = pts.len() - 1;
        if n < 3 {
            return Err(Error::InsufficientData("closed path needs 3 distinct samples".into()));
        }
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            let curvature = if is_corner(i) {
                f64::INFINITY
            } else {
                circumcurvature(prev, pts[i], next)
            };
            out.push(CurvatureSample {
                arc_position: arc[i],
                curvature,
            });
        }
    } else {
        for i in 1..pts.len() - 1 {
            let curvature = if is_corner(i) {
                f64::INFINITY
            } else {
                circumcurvature(pts[i - 1], pts[i], pts[i + 1])
            };
            out.push(CurvatureSample {
                arc_position: arc[i],
                curvature,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circumcurvature_of_unit_circle_points() {
        let k = circumcurvature(Point3::X, Point3::Y, -Point3::X);
        assert!((k - 1.0).abs() < 1e-12);
        assert_eq!(circumcurvature(Point3::ZERO, Point3::X, Point3::X * 2.0), 0.0);
    }

    #[test]
    fn pose_is_orthonormalised() {
        let p = ToolPose::new(Point3::ZERO, Point3::new(0.0, 0.0, -2.0), Point3::new(1.0, 0.0, 0.3));
        assert!(p.is_valid());
        assert_eq!(p.heading, Point3::X);
        // travel parallel to approach still yields a valid pose
        let q = ToolPose::new(Point3::ZERO, -Point3::Z, Point3::Z);
        assert!(q.is_valid());
    }

    #[test]
    fn curvature_needs_three_samples() {
        let p = gen_polygon(&[Point3::ZERO, Point3::X * 0.0005], false, 0.001).unwrap();
        assert_eq!(p.samples.len(), 2);
        assert!(matches!(curvature_profile(&p), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn resampling_keeps_corners_and_length() {
        let sq = gen_polygon(
            &[
                Point3::ZERO,
                Point3::new(0.1, 0.0, 0.0),
                Point3::new(0.1, 0.1, 0.0),
                Point3::new(0.0, 0.1, 0.0),
            ],
            true,
            0.001,
        )
        .unwrap();
        let r = sq.resampled(0.003).unwrap();
        r.validate().unwrap();
        assert_eq!(r.corners.len(), 4);
        assert!((r.arc_length() - 0.4).abs() < 1e-12);
        for &c in &r.corners {
            assert!(sq.samples.iter().any(|p| p.distance(r.samples[c]) < 1e-12));
        }
    }

    #[test]
    fn point_serializes_as_array() {
        let s = serde_json::to_string(&Point3::new(1.0, 2.0, 3.5)).unwrap();
        assert_eq!(s, "[1.0,2.0,3.5]");
        let p: Point3 = serde_json::from_str("[0.5,0,1]").unwrap();
        assert_eq!(p, Point3::new(0.5, 0.0, 1.0));
    }
}
