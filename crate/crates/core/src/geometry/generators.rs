use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{PathFeature, PathKind, Point3, POINT_EPS};
use crate::error::{Error, Result};

/// Default sampling pitch: 1 mm, below the narrowest stock tape width.
pub const DEFAULT_SAMPLE_STEP: f64 = 1e-3;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Sinusoid `y = A·sin(2πx/λ)` in the z = 0 plane, sampled in x.
pub fn gen_wave(amplitude: f64, wavelength: f64, total_length: f64, sample_step: f64) -> Result<PathFeature> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::invalid("amplitude must be non-negative"));
    }
    positive("wavelength", wavelength)?;
    positive("total_length", total_length)?;
    positive("sample_step", sample_step)?;

    let k = 2.0 * PI / wavelength;
    let max_slope = amplitude * k;
    // chord ≤ Δx·√(1 + max_slope²) keeps every sample gap within the step
    let n = ((total_length * (1.0 + max_slope * max_slope).sqrt() / sample_step).ceil() as usize).max(1);
    let samples = (0..=n)
        .map(|i| {
            let x = total_length * i as f64 / n as f64;
            Point3::new(x, amplitude * (k * x).sin(), 0.0)
        })
        .collect();
    Ok(PathFeature {
        kind: PathKind::Wave,
        samples,
        closed: false,
        sample_step,
        corners: Vec::new(),
    })
}

/// Closed circle centred on the origin in the z = 0 plane, counter-clockwise
/// from `(r, 0, 0)`.
pub fn gen_circle(diameter: f64, sample_step: f64) -> Result<PathFeature> {
    positive("diameter", diameter)?;
    positive("sample_step", sample_step)?;
    let circumference = PI * diameter;
    if sample_step > circumference / 4.0 {
        return Err(Error::invalid(format!(
            "sample_step {sample_step} exceeds a quarter of the circumference {circumference}"
        )));
    }
    let r = diameter / 2.0;
    let n = (circumference / sample_step).ceil() as usize;
    let mut samples: Vec<Point3> = (0..n)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / n as f64;
            Point3::new(r * a.cos(), r * a.sin(), 0.0)
        })
        .collect();
    samples.push(samples[0]);
    Ok(PathFeature {
        kind: PathKind::Circle,
        samples,
        closed: true,
        sample_step,
        corners: Vec::new(),
    })
}

fn polygon_vertices(vertices: &[Point3], closed: bool) -> Result<Vec<Point3>> {
    let mut v = vertices.to_vec();
    if closed && v.len() > 1 && v[0].distance(*v.last().unwrap()) <= POINT_EPS {
        v.pop();
    }
    let min = if closed { 3 } else { 2 };
    if v.len() < min {
        return Err(Error::invalid(format!(
            "polygon needs at least {min} distinct vertices, got {}",
            v.len()
        )));
    }
    if let Some(p) = v.iter().find(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("non-finite vertex {p:?}")));
    }
    for (i, w) in v.windows(2).enumerate() {
        if w[0].distance(w[1]) <= POINT_EPS {
            return Err(Error::invalid(format!("duplicate consecutive vertices at index {i}")));
        }
    }
    Ok(v)
}

fn push_line(out: &mut Vec<Point3>, a: Point3, b: Point3, step: f64) {
    let n = ((a.distance(b) / step).ceil() as usize).max(1);
    for k in 1..=n {
        out.push(if k == n { b } else { a.lerp(b, k as f64 / n as f64) });
    }
}

/// Straight segments through `vertices`, densified at `sample_step`.
///
/// Vertices are kept exactly; turning vertices are recorded in
/// [`PathFeature::corners`].
pub fn gen_polygon(vertices: &[Point3], closed: bool, sample_step: f64) -> Result<PathFeature> {
    positive("sample_step", sample_step)?;
    let v = polygon_vertices(vertices, closed)?;
    let mut ring = v.clone();
    if closed {
        ring.push(v[0]);
    }
    let mut samples = vec![ring[0]];
    let mut vertex_index = vec![0];
    for w in ring.windows(2) {
        push_line(&mut samples, w[0], w[1], sample_step);
        vertex_index.push(samples.len() - 1);
    }
    let turns = |prev: Point3, at: Point3, next: Point3| {
        let d1 = (at - prev).normalized().unwrap();
        let d2 = (next - at).normalized().unwrap();
        d1.cross(d2).norm() > 1e-12 || d1.dot(d2) < 0.0
    };
    let mut corners = Vec::new();
    let nv = v.len();
    if closed {
        for i in 0..nv {
            if turns(v[(i + nv - 1) % nv], v[i], v[(i + 1) % nv]) {
                corners.push(vertex_index[i]);
            }
        }
    } else {
        for i in 1..nv - 1 {
            if turns(v[i - 1], v[i], v[i + 1]) {
                corners.push(vertex_index[i]);
            }
        }
    }
    Ok(PathFeature {
        kind: PathKind::SegmentChain,
        samples,
        closed,
        sample_step,
        corners,
    })
}

/// Polygon with every turning vertex replaced by a tangent arc of `radius`.
///
/// Fails when an arc does not fit on its adjacent edges or a vertex turns
/// back on itself.
pub fn fillet_polygon(vertices: &[Point3], closed: bool, radius: f64, sample_step: f64) -> Result<PathFeature> {
    positive("radius", radius)?;
    positive("sample_step", sample_step)?;
    let v = polygon_vertices(vertices, closed)?;
    let nv = v.len();
    let edge_len = |i: usize| v[i].distance(v[(i + 1) % nv]);

    // (tangent-in, tangent-out, centre, turn angle) per filleted vertex
    struct Fillet {
        t_in: Point3,
        t_out: Point3,
        center: Point3,
        angle: f64,
        trim: f64,
    }
    let fillet_at = |i: usize| -> Result<Option<Fillet>> {
        let prev = v[(i + nv - 1) % nv];
        let next = v[(i + 1) % nv];
        let d1 = (v[i] - prev).normalized().unwrap();
        let d2 = (next - v[i]).normalized().unwrap();
        let angle = d1.dot(d2).clamp(-1.0, 1.0).acos();
        if angle < 1e-12 {
            return Ok(None);
        }
        if angle > PI - 1e-6 {
            return Err(Error::invalid(format!("vertex {i} reverses direction; cannot fillet")));
        }
        let trim = radius * (angle / 2.0).tan();
        let bisector = (d2 - d1).normalized().unwrap();
        let center = v[i] + bisector * (radius / (angle / 2.0).cos());
        Ok(Some(Fillet {
            t_in: v[i] - d1 * trim,
            t_out: v[i] + d2 * trim,
            center,
            angle,
            trim,
        }))
    };

    let mut fillets: Vec<Option<Fillet>> = Vec::with_capacity(nv);
    for i in 0..nv {
        let interior = closed || (i > 0 && i < nv - 1);
        fillets.push(if interior { fillet_at(i)? } else { None });
    }
    let edges = if closed { nv } else { nv - 1 };
    for e in 0..edges {
        let a = fillets[e].as_ref().map_or(0.0, |f| f.trim);
        let b = fillets[(e + 1) % nv].as_ref().map_or(0.0, |f| f.trim);
        if a + b > edge_len(e) * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "fillet radius {radius} does not fit on edge {e} (needs {:.6} m, has {:.6} m)",
                a + b,
                edge_len(e)
            )));
        }
    }

    let push_arc = |out: &mut Vec<Point3>, f: &Fillet| {
        let a = (f.t_in - f.center) * (1.0 / radius);
        let b = (f.t_out - f.center) * (1.0 / radius);
        let n = ((radius * f.angle / sample_step).ceil() as usize).max(1);
        let s = f.angle.sin();
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let p = if k == n {
                f.t_out
            } else {
                f.center + (a * ((1.0 - t) * f.angle).sin() + b * (t * f.angle).sin()) * (radius / s)
            };
            out.push(p);
        }
    };
    let entry = |i: usize| fillets[i].as_ref().map_or(v[i], |f| f.t_in);
    let exit = |i: usize| fillets[i].as_ref().map_or(v[i], |f| f.t_out);

    let mut samples = vec![exit(0)];
    for e in 0..edges {
        let j = (e + 1) % nv;
        if exit(e).distance(entry(j)) > POINT_EPS {
            push_line(&mut samples, exit(e), entry(j), sample_step);
        }
        if let Some(f) = fillets[j].as_ref() {
            if closed || j < nv - 1 {
                push_arc(&mut samples, f);
            }
        }
    }
    if closed {
        let first = samples[0];
        *samples.last_mut().unwrap() = first;
    }
    samples.dedup_by(|b, a| a.distance(*b) <= POINT_EPS);
    Ok(PathFeature {
        kind: PathKind::SegmentChain,
        samples,
        closed,
        sample_step,
        corners: Vec::new(),
    })
}

/// A path repeated over several layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    pub base: PathFeature,
    pub layer_count: usize,
    pub layer_height: f64,
    /// 0 for walls, π/2 for a woodpile.
    pub alternate_rotation: f64,
}

impl LayerStack {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.layer_count < 1 {
            return Err(Error::invalid("layer_count must be at least 1"));
        }
        positive("layer_height", self.layer_height)?;
        if !self.alternate_rotation.is_finite() {
            return Err(Error::invalid("alternate_rotation must be finite"));
        }
        Ok(())
    }
}

/// One `(path, z_offset, rotation)` triple per layer. Odd layers are rotated
/// about the base centroid.
pub fn expand_layers(stack: &LayerStack) -> Result<Vec<(PathFeature, f64, f64)>> {
    stack.validate()?;
    let pivot = stack.base.centroid();
    Ok((0..stack.layer_count)
        .map(|k| {
            let z = k as f64 * stack.layer_height;
            let rotation = (k % 2) as f64 * stack.alternate_rotation;
            let path = if rotation != 0.0 {
                stack.base.rotated_z(pivot, rotation)
            } else {
                stack.base.clone()
            };
            (path.translated(Point3::new(0.0, 0.0, z)), z, rotation)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::curvature_profile;

    fn pt(x: f64, y: f64) -> Point3 {
        Point3::new(x, y, 0.0)
    }

    #[test]
    fn flat_wave_is_a_line() {
        let w = gen_wave(0.0, 0.05, 0.15, 0.001).unwrap();
        w.validate().unwrap();
        assert!((w.arc_length() - 0.15).abs() < 1e-6);
        assert!(curvature_profile(&w).unwrap().iter().all(|c| c.curvature.abs() < 1e-6));
    }

    #[test]
    fn wave_rejects_bad_parameters() {
        assert!(gen_wave(0.01, 0.0, 0.15, 0.001).is_err());
        assert!(gen_wave(0.01, 0.05, -1.0, 0.001).is_err());
        assert!(gen_wave(0.01, 0.05, 0.15, 0.0).is_err());
        assert!(gen_wave(-0.01, 0.05, 0.15, 0.001).is_err());
    }

    #[test]
    fn circle_sample_counts_and_curvature() {
        let c = gen_circle(0.10, 0.001).unwrap();
        c.validate().unwrap();
        assert!(c.closed);
        assert!((314..=316).contains(&c.samples.len()), "{}", c.samples.len());
        for s in curvature_profile(&c).unwrap() {
            assert!((s.curvature - 20.0).abs() <= 0.02);
        }
        let small = gen_circle(0.05, 0.001).unwrap();
        for s in curvature_profile(&small).unwrap() {
            assert!((s.curvature - 40.0).abs() <= 0.04);
        }
        assert!(matches!(gen_circle(0.10, 0.20), Err(Error::InvalidParameter(_))));
        assert!(gen_circle(0.0, 0.001).is_err());
    }

    #[test]
    fn polygon_shapes() {
        let tri = gen_polygon(&[pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0)], true, 0.01).unwrap();
        tri.validate().unwrap();
        assert!((tri.arc_length() - (2.0 + 2f64.sqrt())).abs() < 1e-9);
        assert_eq!(tri.corners.len(), 3);
        for v in [pt(0.0, 0.0), pt(1.0, 0.0), pt(0.0, 1.0)] {
            assert!(tri.samples.contains(&v), "corner {v:?} not preserved");
        }

        let line = gen_polygon(&[pt(0.0, 0.0), pt(0.15, 0.0)], false, 0.001).unwrap();
        assert!((line.arc_length() - 0.15).abs() < 1e-12);
        assert!(line.corners.is_empty());

        let hex: Vec<Point3> = (0..6)
            .map(|i| {
                let a = PI / 3.0 * i as f64;
                pt(0.05 * a.cos(), 0.05 * a.sin())
            })
            .collect();
        let h = gen_polygon(&hex, true, 0.001).unwrap();
        assert_eq!(h.corners.len(), 6);
        for i in 0..6 {
            let prev = hex[(i + 5) % 6];
            let next = hex[(i + 1) % 6];
            let a = (prev - hex[i]).normalized().unwrap();
            let b = (next - hex[i]).normalized().unwrap();
            assert!((a.dot(b).acos().to_degrees() - 120.0).abs() < 1e-9);
            assert!((hex[i].distance(next) - 0.05).abs() < 1e-12);
        }

        assert!(gen_polygon(&[pt(0.0, 0.0), pt(0.0, 0.0), pt(1.0, 0.0)], false, 0.01).is_err());
        assert!(gen_polygon(&[pt(0.0, 0.0), pt(1.0, 0.0)], true, 0.01).is_err());
    }

    #[test]
    fn fillet_replaces_corners_with_arcs() {
        let rect = [pt(0.0, 0.0), pt(0.12, 0.0), pt(0.12, 0.08), pt(0.0, 0.08)];
        let f = fillet_polygon(&rect, true, 0.025, 0.001).unwrap();
        f.validate().unwrap();
        let expected = 2.0 * (0.12 + 0.08) - 8.0 * 0.025 + 2.0 * PI * 0.025;
        // chords of 1 mm on r = 25 mm arcs fall short by about 1e-5 m in total
        assert!((f.arc_length() - expected).abs() < 2e-5, "{} vs {expected}", f.arc_length());
        let maxk = curvature_profile(&f)
            .unwrap()
            .iter()
            .map(|c| c.curvature)
            .fold(0.0, f64::max);
        assert!(maxk <= 40.0 * 1.001, "{maxk}");
        assert!(fillet_polygon(&rect, true, 0.05, 0.001).is_err());
    }

    #[test]
    fn layers_offset_and_alternate() {
        let line = gen_polygon(&[pt(0.0, 0.0), pt(0.05, 0.0)], false, 0.001).unwrap();
        let one = expand_layers(&LayerStack {
            base: line.clone(),
            layer_count: 1,
            layer_height: 50e-6,
            alternate_rotation: PI / 2.0,
        })
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].1, 0.0);

        let wood = expand_layers(&LayerStack {
            base: line.clone(),
            layer_count: 4,
            layer_height: 50e-6,
            alternate_rotation: PI / 2.0,
        })
        .unwrap();
        let zs: Vec<f64> = wood.iter().map(|l| l.1).collect();
        for (z, want) in zs.iter().zip([0.0, 50e-6, 100e-6, 150e-6]) {
            assert!((z - want).abs() < 1e-15);
        }
        let rots: Vec<f64> = wood.iter().map(|l| l.2).collect();
        assert_eq!(rots, vec![0.0, PI / 2.0, 0.0, PI / 2.0]);
        for (p, z, _) in &wood {
            assert!((p.arc_length() - line.arc_length()).abs() < 1e-12);
            assert!(p.samples.iter().all(|s| (s.z - z).abs() < 1e-15));
        }
        let wall = expand_layers(&LayerStack {
            base: line,
            layer_count: 2,
            layer_height: 50e-6,
            alternate_rotation: 0.0,
        })
        .unwrap();
        assert_eq!(wall[0].0.samples[5].x, wall[1].0.samples[5].x);
    }
}
