//! Printed-circuit and capacitive-sensor application models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Design, Point3};
use crate::mechanics::{trace_resistance, TapeSpec};
use crate::planner::{expand_design, PlanParams};

/// Force at which a node reaches 95% of its saturation response, N.
pub const SATURATION_FORCE: f64 = 4.9;
pub const DEFAULT_DROP_BUDGET: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorGrid {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    /// Baseline capacitance per node, F.
    pub c0: f64,
    /// Saturation amplitude of the capacitance change, F.
    pub dc_max: f64,
    /// Force scale of the saturating response, N.
    pub f_sat: f64,
    /// Fraction of a node's change that leaks into each 4-neighbour.
    pub crosstalk: f64,
}

impl Default for SensorGrid {
    fn default() -> Self {
        SensorGrid {
            rows: 6,
            cols: 6,
            pitch: 10e-3,
            c0: 1e-12,
            dc_max: 1e-12,
            f_sat: SATURATION_FORCE / 20f64.ln(),
            crosstalk: 0.0,
        }
    }
}

impl SensorGrid {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("sensor grid needs at least one row and column"));
        }
        for (name, v) in [("c0", self.c0), ("dc_max", self.dc_max), ("f_sat", self.f_sat)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.crosstalk) {
            return Err(Error::invalid("crosstalk must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Capacitance change of a node pressed with `force`.
pub fn sensor_response(force: f64, grid: &SensorGrid) -> Result<f64> {
    if !(force >= 0.0) {
        return Err(Error::invalid("force must be non-negative"));
    }
    grid.validate()?;
    Ok(-grid.dc_max * (-force / grid.f_sat).exp_m1())
}

/// Inverse of [`sensor_response`]; infinite at or beyond saturation.
pub fn force_from_response(dc: f64, grid: &SensorGrid) -> f64 {
    let ratio = (dc / grid.dc_max).max(0.0);
    if ratio >= 1.0 {
        return f64::INFINITY;
    }
    -grid.f_sat * (-ratio).ln_1p()
}

pub type DcMap = Vec<Vec<f64>>;

/// Map for a single press, including neighbour crosstalk.
pub fn synthesize_touch(row: usize, col: usize, force: f64, grid: &SensorGrid) -> Result<DcMap> {
    if row >= grid.rows || col >= grid.cols {
        return Err(Error::invalid(format!("node ({row}, {col}) outside the grid")));
    }
    let dc = sensor_response(force, grid)?;
    let mut map = vec![vec![0.0; grid.cols]; grid.rows];
    map[row][col] = dc;
    let neighbours = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)];
    for (dr, dc_) in neighbours {
        let (r, c) = (row as i64 + dr, col as i64 + dc_);
        if (0..grid.rows as i64).contains(&r) && (0..grid.cols as i64).contains(&c) {
            map[r as usize][c as usize] += grid.crosstalk * dc;
        }
    }
    Ok(map)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub row: usize,
    pub col: usize,
    pub force: f64,
    pub dc_map: DcMap,
}

/// Strongest node of a map, or `None` for an untouched map. Ties go to the
/// lowest (row, col).
pub fn decode_touch(map: &DcMap, grid: &SensorGrid) -> Result<Option<TouchEvent>> {
    grid.validate()?;
    if map.len() != grid.rows || map.iter().any(|r| r.len() != grid.cols) {
        return Err(Error::InvalidInput(format!(
            "map is not {}×{}",
            grid.rows, grid.cols
        )));
    }
    let mut best: Option<(usize, usize, f64)> = None;
    for (r, row) in map.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite value at ({r}, {c})")));
            }
            if v > 0.0 && best.is_none_or(|(_, _, b)| v > b) {
                best = Some((r, c, v));
            }
        }
    }
    Ok(best.map(|(row, col, v)| TouchEvent {
        row,
        col,
        force: force_from_response(v, grid),
        dc_map: map.clone(),
    }))
}

/// Decodes a recorded sequence of maps.
pub fn decode_replay(frames: &[DcMap], grid: &SensorGrid) -> Result<Vec<Option<TouchEvent>>> {
    frames.iter().map(|m| decode_touch(m, grid)).collect()
}

/// Rectangular block of nodes `[row0, row1) × [col0, col1)` driving a finger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub finger: u32,
    pub rows: (usize, usize),
    pub cols: (usize, usize),
}

impl Region {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.rows.0..self.rows.1).contains(&row) && (self.cols.0..self.cols.1).contains(&col)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub regions: Vec<Region>,
}

impl Default for RegionLayout {
    /// Fingers 1–5 on the first five columns; the last column is unmapped.
    fn default() -> Self {
        RegionLayout {
            regions: (0..5)
                .map(|c| Region {
                    finger: c as u32 + 1,
                    rows: (0, 6),
                    cols: (c, c + 1),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandCommand {
    pub finger: u32,
    /// Bend fraction, 0 open to 1 fully bent.
    pub bend: f64,
}

/// Finger and bend for a touch; `None` outside every region.
pub fn map_to_hand_command(touch: &TouchEvent, layout: &RegionLayout, grid: &SensorGrid) -> Option<HandCommand> {
    let region = layout.regions.iter().find(|r| r.contains(touch.row, touch.col))?;
    let dc = touch.dc_map.get(touch.row)?.get(touch.col)?;
    Some(HandCommand {
        finger: region.finger,
        bend: (dc / grid.dc_max).clamp(0.0, 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitReport {
    pub trace_length: f64,
    pub trace_resistance: f64,
    pub voltage_drop: f64,
    pub pass: bool,
}

/// Treats the design's strips as one series conductor feeding `load`.
/// Strips must touch end to strip (within a tape width) to form one net.
pub fn circuit_check(design: &Design, tape: &TapeSpec, supply: f64, load: f64, budget: f64) -> Result<CircuitReport> {
    if !(supply > 0.0) || !(load > 0.0) {
        return Err(Error::invalid("supply and load must be positive"));
    }
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::invalid("drop budget must lie in (0, 1)"));
    }
    let strips = expand_design(design, tape, &PlanParams::default())?;
    let paths: Vec<&[Point3]> = strips.iter().map(|s| s.points.as_slice()).collect();
    if !connected(&paths, tape.width) {
        return Err(Error::InvalidInput("trace is not connected".into()));
    }
    let length: f64 = strips.iter().map(|s| s.planned_length).sum();
    let r = trace_resistance(length, tape)?;
    let drop = if load.is_infinite() { 0.0 } else { supply * r / (r + load) };
    Ok(CircuitReport {
        trace_length: length,
        trace_resistance: r,
        voltage_drop: drop,
        pass: drop <= budget * supply,
    })
}

fn connected(paths: &[&[Point3]], tolerance: f64) -> bool {
    let n = paths.len();
    let touches = |a: &[Point3], b: &[Point3]| {
        [a[0], *a.last().unwrap()]
            .iter()
            .any(|e| b.iter().any(|p| p.distance(*e) <= tolerance))
    };
    let mut reached = vec![false; n];
    let mut stack = vec![0];
    reached[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !reached[j] && (touches(paths[i], paths[j]) || touches(paths[j], paths[i])) {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    reached.iter().all(|&r| r)
}
