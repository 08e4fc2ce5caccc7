use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{polyline_length, PathFeature, Point3, ToolPose};
use crate::error::{Error, Result};

/// Largest accepted relative change of path length under projection.
pub const MAX_DISTORTION: f64 = 0.02;

/// Target surface for conformal placement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Surface {
    /// Points `p` with `normal · p = offset`; `normal` need not be unit length.
    Plane { normal: Point3, offset: f64 },
    /// Upper hemisphere (z ≥ center.z).
    Hemisphere { center: Point3, radius: f64 },
}

impl Surface {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Surface::Plane { normal, offset } => {
                if normal.normalized().is_none() || !offset.is_finite() {
                    return Err(Error::invalid("plane needs a non-zero normal and finite offset"));
                }
            }
            Surface::Hemisphere { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
                    return Err(Error::invalid("hemisphere radius must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Outward unit normal at a surface point.
    pub fn normal_at(&self, p: Point3) -> Point3 {
        match *self {
            Surface::Plane { normal, .. } => normal.normalized().unwrap_or(Point3::Z),
            Surface::Hemisphere { center, .. } => (p - center).normalized().unwrap_or(Point3::Z),
        }
    }

    /// Distance from `p` to the (untrimmed) surface.
    pub fn distance(&self, p: Point3) -> f64 {
        match *self {
            Surface::Plane { normal, offset } => {
                let n = normal.normalized().unwrap_or(Point3::Z);
                (n.dot(p) - offset / normal.norm()).abs()
            }
            Surface::Hemisphere { center, radius } => ((p - center).norm() - radius).abs(),
        }
    }

    /// In-plane basis `(e1, e2)`; `e2` points as close to +z as possible for
    /// vertical planes.
    fn plane_basis(normal: Point3) -> (Point3, Point3) {
        let n = normal.normalized().unwrap_or(Point3::Z);
        let e1 = Point3::Z.cross(n).normalized().unwrap_or(Point3::X);
        (e1, n.cross(e1))
    }

    /// Maps parameter-space `(u, v)` onto the surface. Hemispheres use the
    /// azimuthal-equidistant chart centred on the apex, which keeps radial
    /// distances exact.
    pub fn map(&self, u: f64, v: f64) -> Option<Point3> {
        match *self {
            Surface::Plane { normal, offset } => {
                let n = normal.normalized()?;
                let (e1, e2) = Self::plane_basis(normal);
                Some(n * (offset / normal.norm()) + e1 * u + e2 * v)
            }
            Surface::Hemisphere { center, radius } => {
                let rho = u.hypot(v);
                if rho > radius * FRAC_PI_2 * (1.0 + 1e-12) {
                    return None;
                }
                let theta = (rho / radius).min(FRAC_PI_2);
                let phi = v.atan2(u);
                Some(
                    center
                        + Point3::new(
                            theta.sin() * phi.cos(),
                            theta.sin() * phi.sin(),
                            theta.cos(),
                        ) * radius,
                )
            }
        }
    }
}

/// A 2-D path drawn in a surface's parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConformalPatch {
    pub surface: Surface,
    pub path2d: PathFeature,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConformalProjection {
    pub poses: Vec<ToolPose>,
    pub length_2d: f64,
    pub length_3d: f64,
    /// `|length_3d − length_2d| / length_2d`
    pub distortion: f64,
}

/// Drapes the patch path over its surface, one pose per resampled point.
///
/// Approach vectors are inward surface normals; headings follow the projected
/// path. Fails if the path leaves the chart domain or if the length
/// distortion exceeds [`MAX_DISTORTION`].
pub fn project_conformal(patch: &ConformalPatch, sample_step: f64) -> Result<ConformalProjection> {
    project_conformal_with_limit(patch, sample_step, MAX_DISTORTION)
}

pub fn project_conformal_with_limit(
    patch: &ConformalPatch,
    sample_step: f64,
    max_distortion: f64,
) -> Result<ConformalProjection> {
    patch.surface.validate()?;
    patch.path2d.validate()?;
    let flat = patch.path2d.resampled(sample_step)?;
    let arc = flat.arc_positions();

    let mut points = Vec::with_capacity(flat.samples.len());
    let mut outside = Vec::new();
    for (p, &s) in flat.samples.iter().zip(&arc) {
        match patch.surface.map(p.x, p.y) {
            Some(q) => points.push(q),
            None => outside.push(s),
        }
    }
    if !outside.is_empty() {
        return Err(Error::OutOfDomain { arc_positions: outside });
    }

    let n = points.len();
    let poses = (0..n)
        .map(|i| {
            let travel = if i + 1 < n {
                points[i + 1] - points[if i > 0 { i - 1 } else { i }]
            } else {
                points[i] - points[i - 1]
            };
            ToolPose::new(points[i], -patch.surface.normal_at(points[i]), travel)
        })
        .collect();

    let length_2d = flat.arc_length();
    let length_3d = polyline_length(&points);
    let distortion = (length_3d - length_2d).abs() / length_2d;
    if distortion > max_distortion {
        return Err(Error::ExcessiveDistortion {
            distortion,
            limit: max_distortion,
        });
    }
    Ok(ConformalProjection {
        poses,
        length_2d,
        length_3d,
        distortion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::gen_polygon;
    use std::f64::consts::PI;

    fn line2d(a: (f64, f64), b: (f64, f64)) -> PathFeature {
        gen_polygon(&[Point3::new(a.0, a.1, 0.0), Point3::new(b.0, b.1, 0.0)], false, 0.001).unwrap()
    }

    #[test]
    fn horizontal_plane_is_identity() {
        let path = line2d((0.0, 0.0), (0.1, 0.02));
        let patch = ConformalPatch {
            surface: Surface::Plane {
                normal: Point3::Z,
                offset: 0.0,
            },
            path2d: path.clone(),
        };
        let proj = project_conformal(&patch, 0.001).unwrap();
        assert_eq!(proj.poses.len(), path.samples.len());
        for (pose, s) in proj.poses.iter().zip(&path.samples) {
            assert!(pose.position.distance(*s) < 1e-12);
            assert_eq!(pose.approach, -Point3::Z);
            assert!(pose.is_valid());
        }
        assert!(proj.distortion < 1e-12);
    }

    #[test]
    fn quarter_great_circle_on_hemisphere() {
        let r = 0.05;
        let patch = ConformalPatch {
            surface: Surface::Hemisphere {
                center: Point3::ZERO,
                radius: r,
            },
            path2d: line2d((0.0, 0.0), (r * PI / 2.0, 0.0)),
        };
        let proj = project_conformal(&patch, 0.001).unwrap();
        let end = proj.poses.last().unwrap();
        // endpoint on the equator, approach horizontal
        assert!(end.position.z.abs() < 1e-12);
        assert!((end.position.x - r).abs() < 1e-12);
        assert!(end.approach.z.asin().abs() < 1e-6);
        for pose in &proj.poses {
            assert!((pose.position.norm() - r).abs() < 1e-9);
            assert!(pose.is_valid());
            let inward = -(pose.position.normalized().unwrap());
            assert!(pose.approach.dot(inward) > 1.0 - 1e-12);
        }
        assert!(proj.distortion < 2e-4, "{}", proj.distortion);
    }

    #[test]
    fn too_long_path_leaves_hemisphere() {
        let r = 0.05;
        let half = r * PI * 1.05 / 2.0;
        let patch = ConformalPatch {
            surface: Surface::Hemisphere {
                center: Point3::ZERO,
                radius: r,
            },
            path2d: line2d((-half, 0.0), (half, 0.0)),
        };
        match project_conformal(&patch, 0.001) {
            Err(Error::OutOfDomain { arc_positions }) => {
                assert!(!arc_positions.is_empty());
                assert!(arc_positions[0] < 0.01);
            }
            other => panic!("expected out-of-domain, got {other:?}"),
        }
    }

    #[test]
    fn azimuthal_paths_are_rejected_for_distortion() {
        let r = 0.05;
        let rho = r * PI / 4.0;
        let circle = crate::geometry::gen_circle(2.0 * rho, 0.001).unwrap();
        let patch = ConformalPatch {
            surface: Surface::Hemisphere {
                center: Point3::ZERO,
                radius: r,
            },
            path2d: circle,
        };
        assert!(matches!(
            project_conformal(&patch, 0.001),
            Err(Error::ExcessiveDistortion { .. })
        ));
    }

    #[test]
    fn vertical_plane_maps_v_upwards() {
        let s = Surface::Plane {
            normal: Point3::X,
            offset: 0.2,
        };
        let p = s.map(0.0, 0.1).unwrap();
        assert!((p.x - 0.2).abs() < 1e-15);
        assert!((p.z - 0.1).abs() < 1e-15);
        assert!(s.distance(p) < 1e-12);
    }
}
