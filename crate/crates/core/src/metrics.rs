//! Dimensional-accuracy metrics on placed strips and batch statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cumulative_lengths, polyline_length, Point3};
use crate::simulator::{PlacedFeature, PlacementOutcome};

/// Samples narrower than this fraction of nominal width are cut debris and
/// are trimmed before measuring.
pub const TRIM_WIDTH_FRACTION: f64 = 0.5;

/// Index range `[a, b]` of samples kept after trimming ragged ends.
fn trimmed(f: &PlacedFeature) -> Result<(usize, usize)> {
    if f.centerline.len() < 2 {
        return Err(Error::InvalidInput(format!("feature {} has fewer than 2 samples", f.feature)));
    }
    f.validate()?;
    let keep = |w: &f64| *w >= TRIM_WIDTH_FRACTION * f.nominal_width;
    let a = f.width_profile.iter().position(keep);
    let b = f.width_profile.iter().rposition(keep);
    match (a, b) {
        (Some(a), Some(b)) if b > a => Ok((a, b)),
        _ => Err(Error::InvalidInput(format!("feature {} has no full-width span", f.feature))),
    }
}

/// Tape length between the two cut ends.
pub fn effective_length(f: &PlacedFeature) -> Result<f64> {
    let (a, b) = trimmed(f)?;
    Ok(polyline_length(&f.centerline[a..=b]) + f.end_cut_offsets.0 + f.end_cut_offsets.1)
}

/// Unit vector along the trimmed chord and the in-surface side direction.
fn chord_frame(f: &PlacedFeature, a: usize, b: usize) -> Result<(Point3, Point3)> {
    let along = (f.centerline[b] - f.centerline[a])
        .normalized()
        .ok_or_else(|| Error::InvalidInput(format!("feature {} has coincident ends", f.feature)))?;
    let mut n = Point3::ZERO;
    for v in &f.normals[a..=b] {
        n += *v;
    }
    let side = n
        .cross(along)
        .normalized()
        .unwrap_or_else(|| along.any_orthogonal());
    Ok((along, side))
}

/// The two tape edges, each offset from the centerline by half the local
/// width along the side direction.
fn edges(f: &PlacedFeature, a: usize, b: usize, along: Point3) -> [Vec<Point3>; 2] {
    let mut left = Vec::with_capacity(b - a + 1);
    let mut right = Vec::with_capacity(b - a + 1);
    for k in a..=b {
        let side = f.normals[k]
            .cross(along)
            .normalized()
            .unwrap_or_else(|| along.any_orthogonal());
        let h = side * (f.width_profile[k] / 2.0);
        left.push(f.centerline[k] + h);
        right.push(f.centerline[k] - h);
    }
    [left, right]
}

fn max_chord_distance(points: &[Point3]) -> f64 {
    let (p, q) = (points[0], *points.last().unwrap());
    let Some(dir) = (q - p).normalized() else {
        return points.iter().map(|x| x.distance(p)).fold(0.0, f64::max);
    };
    // residuals at the rounding level of the coordinates count as collinear
    let floor = 64.0 * f64::EPSILON * (p.norm() + q.norm() + p.distance(q));
    let d = points
        .iter()
        .map(|x| {
            let r = *x - p;
            (r - dir * r.dot(dir)).norm()
        })
        .fold(0.0, f64::max);
    if d <= floor {
        0.0
    } else {
        d
    }
}

/// Largest excursion of either tape edge from the straight line joining its
/// own trimmed endpoints.
pub fn straightness_deviation(f: &PlacedFeature) -> Result<f64> {
    if !f.straight {
        return Err(Error::NotApplicable(format!("feature {} is not nominally straight", f.feature)));
    }
    let (a, b) = trimmed(f)?;
    let (along, _) = chord_frame(f, a, b)?;
    let [l, r] = edges(f, a, b, along);
    Ok(max_chord_distance(&l).max(max_chord_distance(&r)))
}

/// Mean absolute residual of `y` about its least-squares line in `x`.
fn mean_abs_residual(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    x.iter()
        .zip(y)
        .map(|(u, v)| (v - my - slope * (u - mx)).abs())
        .sum::<f64>()
        / n
}

/// Arithmetic-mean deviation of the edge profiles (lateral edge position
/// relative to the planned edge, against arc position), averaged over both
/// edges.
pub fn profile_roughness(f: &PlacedFeature) -> Result<f64> {
    let (a, b) = trimmed(f)?;
    let s = cumulative_lengths(&f.centerline[a..=b]);
    let half_excess = |k: usize| (f.width_profile[k] - f.nominal_width) / 2.0;
    let left: Vec<f64> = (a..=b).map(|k| f.lateral_deviation[k] + half_excess(k)).collect();
    let right: Vec<f64> = (a..=b).map(|k| f.lateral_deviation[k] - half_excess(k)).collect();
    Ok((mean_abs_residual(&s, &left) + mean_abs_residual(&s, &right)) / 2.0)
}

/// Metrics of one placed strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureQuality {
    pub feature: usize,
    pub planned_length: f64,
    pub effective_length: f64,
    /// |effective − planned| / planned.
    pub length_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straightness_deviation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straightness_ratio: Option<f64>,
    pub width_mean: f64,
    pub width_std: f64,
    /// |mean width − nominal| / nominal.
    pub width_deviation: f64,
    pub profile_roughness: f64,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 2)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

pub fn feature_quality(f: &PlacedFeature) -> Result<FeatureQuality> {
    let (a, b) = trimmed(f)?;
    let effective = effective_length(f)?;
    let straightness = match straightness_deviation(f) {
        Ok(d) => Some(d),
        Err(Error::NotApplicable(_)) => None,
        Err(e) => return Err(e),
    };
    let (width_mean, width_std) = mean_std(&f.width_profile[a..=b]);
    Ok(FeatureQuality {
        feature: f.feature,
        planned_length: f.planned_length,
        effective_length: effective,
        length_error: (effective - f.planned_length).abs() / f.planned_length,
        straightness_deviation: straightness,
        straightness_ratio: straightness.map(|d| d / effective),
        width_mean,
        width_std: width_std.unwrap_or(0.0),
        width_deviation: (width_mean - f.nominal_width).abs() / f.nominal_width,
        profile_roughness: profile_roughness(f)?,
    })
}

/// Metrics of every strip in an outcome.
pub fn quality(outcome: &PlacementOutcome) -> Result<Vec<FeatureQuality>> {
    outcome.features.iter().map(feature_quality).collect()
}

/// Mean and sample (n − 1) standard deviation; `std` is absent for n < 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let (mean, std) = mean_std(values);
        Stat { mean, std }
    }
}

/// Batch statistics of one feature across outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub n: usize,
    pub feature: usize,
    pub effective_length: Stat,
    pub length_error: Stat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straightness_deviation: Option<Stat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub straightness_ratio: Option<Stat>,
    pub width_mean: Stat,
    pub width_std: Stat,
    pub width_deviation: Stat,
    pub profile_roughness: Stat,
}

impl QualityReport {
    /// Whether standard deviations are available.
    pub fn has_spread(&self) -> bool {
        self.n >= 2
    }
}

/// Aggregates per-sample metrics of a single feature.
pub fn batch_stats(samples: &[FeatureQuality]) -> Result<QualityReport> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientData("batch is empty".into()));
    };
    let col = |g: fn(&FeatureQuality) -> f64| Stat::of(&samples.iter().map(g).collect::<Vec<_>>());
    let straight: Option<Vec<f64>> = samples.iter().map(|q| q.straightness_deviation).collect();
    let ratio: Option<Vec<f64>> = samples.iter().map(|q| q.straightness_ratio).collect();
    Ok(QualityReport {
        n: samples.len(),
        feature: first.feature,
        effective_length: col(|q| q.effective_length),
        length_error: col(|q| q.length_error),
        straightness_deviation: straight.map(|v| Stat::of(&v)),
        straightness_ratio: ratio.map(|v| Stat::of(&v)),
        width_mean: col(|q| q.width_mean),
        width_std: col(|q| q.width_std),
        width_deviation: col(|q| q.width_deviation),
        profile_roughness: col(|q| q.profile_roughness),
    })
}

/// One report per feature over a batch of outcomes of the same program.
pub fn batch_report(outcomes: &[PlacementOutcome]) -> Result<Vec<QualityReport>> {
    let Some(first) = outcomes.first() else {
        return Err(Error::InsufficientData("batch is empty".into()));
    };
    let per: Vec<Vec<FeatureQuality>> = outcomes.iter().map(quality).collect::<Result<_>>()?;
    (0..first.features.len())
        .map(|f| {
            let column: Vec<FeatureQuality> = per
                .iter()
                .map(|q| q.get(f).cloned().ok_or(Error::InvalidInput("outcomes differ in feature count".into())))
                .collect::<Result<_>>()?;
            batch_stats(&column)
        })
        .collect()
}

/// A labelled report row for the tabular export.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub substrate: String,
    pub length: f64,
    pub report: QualityReport,
}

/// Long-form CSV with one line per (metric, length, substrate).
pub fn metrics_table_csv(rows: &[TableRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    w.write_record(["metric", "length_m", "substrate", "n", "mean", "std"]).map_err(io)?;
    for row in rows {
        let r = &row.report;
        let mut metrics = vec![
            ("effective_length", Some(r.effective_length)),
            ("length_error", Some(r.length_error)),
            ("straightness_deviation", r.straightness_deviation),
            ("straightness_ratio", r.straightness_ratio),
            ("width_mean", Some(r.width_mean)),
            ("width_deviation", Some(r.width_deviation)),
            ("profile_roughness", Some(r.profile_roughness)),
        ];
        metrics.retain(|(_, s)| s.is_some());
        for (name, stat) in metrics {
            let stat = stat.unwrap();
            let std = stat.std.map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                name.to_string(),
                row.length.to_string(),
                row.substrate.clone(),
                r.n.to_string(),
                stat.mean.to_string(),
                std,
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
