//! Deterministic SVG views of programs and placed outcomes.
//!
//! Geometry is scaled into fixed-size panels with three-decimal formatting, so
//! identical input gives identical bytes. Each strip is a filled
//! `class="ribbon"` path of tape width plus a `class="centerline"` path.
//! Multi-layer programs get a second, side-view panel.

use std::fmt::Write;

use crate::geometry::Point3;
use crate::planner::MotionProgram;
use crate::simulator::PlacementOutcome;

const PANEL: f64 = 400.0;
const MARGIN: f64 = 20.0;

/// Default magnification of placement deviations in outcome views.
pub const DEFAULT_EXAGGERATION: f64 = 10.0;

struct Strip {
    centerline: Vec<Point3>,
    /// Unit side direction per sample, in the surface.
    sides: Vec<Point3>,
    widths: Vec<f64>,
    layer: Option<usize>,
}

fn sides(points: &[Point3], normals: &[Point3]) -> Vec<Point3> {
    let n = points.len();
    (0..n)
        .map(|k| {
            let a = points[k.saturating_sub(1)];
            let b = points[(k + 1).min(n - 1)];
            normals[k]
                .cross(b - a)
                .normalized()
                .unwrap_or_else(|| normals[k].any_orthogonal())
        })
        .collect()
}

#[derive(Clone, Copy)]
struct View {
    /// Maps a point to the (horizontal, vertical) drawing axes, in metres.
    axes: fn(Point3) -> (f64, f64),
    min: (f64, f64),
    scale: f64,
    origin: (f64, f64),
}

impl View {
    fn fit(points: impl Iterator<Item = Point3>, axes: fn(Point3) -> (f64, f64), origin: (f64, f64)) -> View {
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            let (u, v) = axes(p);
            lo = (lo.0.min(u), lo.1.min(v));
            hi = (hi.0.max(u), hi.1.max(v));
        }
        if !lo.0.is_finite() {
            lo = (0.0, 0.0);
            hi = (0.0, 0.0);
        }
        let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-6);
        View {
            axes,
            min: lo,
            scale: (PANEL - 2.0 * MARGIN) / span,
            origin,
        }
    }

    fn map(&self, p: Point3) -> (f64, f64) {
        let (u, v) = (self.axes)(p);
        (
            self.origin.0 + MARGIN + (u - self.min.0) * self.scale,
            // SVG y grows downwards
            self.origin.1 + PANEL - MARGIN - (v - self.min.1) * self.scale,
        )
    }
}

fn top(p: Point3) -> (f64, f64) {
    (p.x, p.y)
}

fn side(p: Point3) -> (f64, f64) {
    (p.x, p.z)
}

fn path_data(view: &View, points: impl Iterator<Item = Point3>, close: bool) -> String {
    let mut d = String::new();
    for (i, p) in points.enumerate() {
        let (x, y) = view.map(p);
        let _ = write!(d, "{}{x:.3},{y:.3}", if i == 0 { "M" } else { " L" });
    }
    if close {
        d.push_str(" Z");
    }
    d
}

fn draw(out: &mut String, view: &View, strips: &[Strip]) {
    for (i, s) in strips.iter().enumerate() {
        let n = s.centerline.len();
        let left = (0..n).map(|k| s.centerline[k] + s.sides[k] * (s.widths[k] / 2.0));
        let right = (0..n).rev().map(|k| s.centerline[k] - s.sides[k] * (s.widths[k] / 2.0));
        let layer = s.layer.map(|l| format!(" data-layer=\"{l}\"")).unwrap_or_default();
        let _ = writeln!(
            out,
            "  <path class=\"ribbon\" data-feature=\"{i}\"{layer} d=\"{}\"/>",
            path_data(view, left.chain(right), true)
        );
        let _ = writeln!(
            out,
            "  <path class=\"centerline\" data-feature=\"{i}\" d=\"{}\"/>",
            path_data(view, s.centerline.iter().copied(), false)
        );
    }
}

fn document(strips: &[Strip], title: &str, label: Option<String>) -> String {
    let layered = strips.iter().filter_map(|s| s.layer).max().is_some_and(|l| l > 0);
    let width = if layered { 2.0 * PANEL } else { PANEL };
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{PANEL:.0}\" viewBox=\"0 0 {width:.0} {PANEL:.0}\">"
    );
    out.push_str(
        "  <style>.ribbon{fill:#c87533;fill-opacity:0.45;stroke:#8a4b1c;stroke-width:0.5}\
         .centerline{fill:none;stroke:#202020;stroke-width:0.6}\
         text{font:12px sans-serif}</style>\n",
    );
    let _ = writeln!(out, "  <text x=\"{MARGIN}\" y=\"14\">{title}</text>");
    if let Some(l) = label {
        let _ = writeln!(out, "  <text class=\"exaggeration\" x=\"{MARGIN}\" y=\"{}\">{l}</text>", PANEL - 4.0);
    }
    let all = || strips.iter().flat_map(|s| s.centerline.iter().copied());
    let top_view = View::fit(all(), top, (0.0, 0.0));
    let _ = writeln!(out, "  <g class=\"panel\" id=\"top\">");
    draw(&mut out, &top_view, strips);
    out.push_str("  </g>\n");
    if layered {
        let side_view = View::fit(all(), side, (PANEL, 0.0));
        let _ = writeln!(out, "  <text x=\"{}\" y=\"14\">side</text>", PANEL + MARGIN);
        let _ = writeln!(out, "  <g class=\"panel\" id=\"side\">");
        for (i, s) in strips.iter().enumerate() {
            let _ = writeln!(
                out,
                "  <path class=\"centerline\" data-feature=\"{i}\" d=\"{}\"/>",
                path_data(&side_view, s.centerline.iter().copied(), false)
            );
        }
        out.push_str("  </g>\n");
    }
    out.push_str("</svg>\n");
    out
}

/// Planned strips at nominal tape width.
pub fn render_program(program: &MotionProgram, tape_width: f64) -> String {
    let strips: Vec<Strip> = (0..program.features.len())
        .map(|f| {
            let info = &program.features[f];
            let centerline = program.laid_positions(f);
            let normals: Vec<Point3> = centerline.iter().map(|&p| info.surface.normal_at(p)).collect();
            Strip {
                sides: sides(&centerline, &normals),
                widths: vec![tape_width; centerline.len()],
                layer: info.layer,
                centerline,
            }
        })
        .collect();
    document(&strips, "planned", None)
}

/// Placed strips with lateral and width deviations magnified by
/// `exaggeration`.
pub fn render_outcome(outcome: &PlacementOutcome, exaggeration: f64) -> String {
    let strips: Vec<Strip> = outcome
        .features
        .iter()
        .map(|f| {
            let s = sides(&f.centerline, &f.normals);
            let centerline = (0..f.centerline.len())
                .map(|k| f.centerline[k] + s[k] * (f.lateral_deviation[k] * (exaggeration - 1.0)))
                .collect();
            let widths = f
                .width_profile
                .iter()
                .map(|w| f.nominal_width + (w - f.nominal_width) * exaggeration)
                .collect();
            Strip {
                centerline,
                sides: s,
                widths,
                layer: f.layer,
            }
        })
        .collect();
    document(
        &strips,
        &format!("placed, seed {}", outcome.seed),
        Some(format!("deviations ×{exaggeration}")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Catalog;
    use crate::geometry::{Design, FeatureSpec, LayersSpec, LineSpec, PathSpec};
    use crate::planner::{plan, PlanParams, RobotLimits};
    use crate::simulator::simulate;

    fn planned(design: &Design) -> MotionProgram {
        let c = Catalog::builtin();
        plan(
            design,
            c.tape("copper-6.35").unwrap(),
            c.substrate("acrylic").unwrap(),
            &PlanParams::default(),
            &RobotLimits::default(),
        )
        .unwrap()
    }

    #[test]
    fn straight_line_has_one_ribbon() {
        let svg = render_program(&planned(&Design::straight_line(0.15)), 6.35e-3);
        assert_eq!(svg.matches("class=\"ribbon\"").count(), 1);
        assert!(!svg.contains("id=\"side\""));
        assert_eq!(svg, render_program(&planned(&Design::straight_line(0.15)), 6.35e-3));
    }

    #[test]
    fn woodpile_gets_side_panel() {
        let d = Design::new([FeatureSpec::Layers(LayersSpec {
            base: PathSpec::Line(LineSpec {
                start: Point3::ZERO,
                end: Point3::new(0.05, 0.0, 0.0),
            }),
            layer_count: 4,
            layer_height: None,
            alternate_rotation: std::f64::consts::FRAC_PI_2,
        })]);
        let p = planned(&d);
        let c = Catalog::builtin();
        let o = simulate(
            &p,
            c.tape("copper-6.35").unwrap(),
            c.substrate("acrylic").unwrap(),
            c.default_noise(),
        )
        .unwrap();
        let svg = render_outcome(&o, DEFAULT_EXAGGERATION);
        assert!(svg.contains("id=\"side\""));
        assert_eq!(svg.matches("class=\"ribbon\"").count(), 4);
        assert!(svg.contains("deviations ×10"));
    }
}
