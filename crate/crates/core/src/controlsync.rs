//! Discrete-event model of the robot controller and the print control module
//! (feed stepper, cut servo) exchanging I/O edges with latency.
//!
//! The robot raises `feed_start` on arriving at a strip's landing pose and
//! holds motion until the feeder acknowledges, so feeding and motion start
//! together. `feed_stop` is open loop: the feeder keeps dispensing at the
//! programmed speed until the edge reaches it, which over-feeds by
//! speed × delay. The cut is raised at the cut pose and the robot leaves only
//! after `cut_done`.
//!
//! PCM reactions are processed in arrival order; an edge delayed by jitter
//! also delays every later edge, so reordering cannot occur.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::polyline_length;
use crate::planner::{MotionProgram, StepEvent};
use crate::simulator::PlacementOutcome;

pub const TRACE_SCHEMA_VERSION: u32 = 1;
/// 20 mm roller circumference, 200-step motor, 16× microstepping.
pub const DEFAULT_STEPS_PER_METER: f64 = 160_000.0;
pub const DEFAULT_CUT_CYCLE: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoSource {
    Robot,
    Pcm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IoKind {
    FeedStart,
    FeedStop,
    CutBegin,
    CutDone,
    MotionStart,
    MotionStop,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoEvent {
    pub t: f64,
    pub source: IoSource,
    pub kind: IoKind,
    pub feature: usize,
    /// Index (in the trace's event list) of the robot edge this PCM event
    /// reacts to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedMode {
    Idle,
    Feeding,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedState {
    pub t: f64,
    pub steps_issued: u64,
    pub steps_per_meter: f64,
    pub state: FeedMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutMode {
    Retracted,
    Cutting,
    Returning,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutState {
    pub t: f64,
    pub state: CutMode,
    pub cycle_duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub fixed_delay: f64,
    pub jitter_sigma: f64,
    pub seed: u64,
}

impl LatencyModel {
    pub fn zero() -> Self {
        LatencyModel {
            fixed_delay: 0.0,
            jitter_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn fixed(delay: f64) -> Self {
        LatencyModel {
            fixed_delay: delay,
            ..Self::zero()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_delay >= 0.0 && self.fixed_delay.is_finite()) {
            return Err(Error::invalid("fixed_delay must be non-negative"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(Error::invalid("jitter_sigma must be non-negative"));
        }
        Ok(())
    }
}

/// PCM hardware parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcmConfig {
    pub steps_per_meter: f64,
    pub cut_cycle: f64,
}

impl Default for PcmConfig {
    fn default() -> Self {
        PcmConfig {
            steps_per_meter: DEFAULT_STEPS_PER_METER,
            cut_cycle: DEFAULT_CUT_CYCLE,
        }
    }
}

impl PcmConfig {
    pub fn quantum(&self) -> f64 {
        1.0 / self.steps_per_meter
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.steps_per_meter > 0.0 && self.steps_per_meter.is_finite()) {
            return Err(Error::invalid("steps_per_meter must be positive"));
        }
        if !(self.cut_cycle > 0.0) {
            return Err(Error::invalid("cut cycle duration must be positive"));
        }
        Ok(())
    }
}

/// Tape dispensed against path traversed for one feature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureFeed {
    pub feature: usize,
    pub steps: u64,
    pub fed_length: f64,
    pub traversed_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncTrace {
    pub schema_version: u32,
    pub program_digest: String,
    pub latency: LatencyModel,
    pub pcm: PcmConfig,
    /// Time ordered.
    pub events: Vec<IoEvent>,
    pub feed_history: Vec<FeedState>,
    pub cut_history: Vec<CutState>,
    pub features: Vec<FeatureFeed>,
    pub complete: bool,
}

impl SyncTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }
}

struct Pcm<'a> {
    latency: &'a LatencyModel,
    rng: ChaCha8Rng,
    last_reaction: f64,
    events: Vec<IoEvent>,
    feeding: bool,
    cut_busy_until: f64,
    steps_total: u64,
    feed_history: Vec<FeedState>,
    cut_history: Vec<CutState>,
}

impl Pcm<'_> {
    fn robot(&mut self, t: f64, kind: IoKind, feature: usize) -> usize {
        self.events.push(IoEvent {
            t,
            source: IoSource::Robot,
            kind,
            feature,
            cause: None,
        });
        self.events.len() - 1
    }

    /// Arrival time at the PCM of a robot edge raised at `t`.
    fn react(&mut self, t: f64) -> f64 {
        let jitter = if self.latency.jitter_sigma > 0.0 {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            self.latency.jitter_sigma * n.abs()
        } else {
            0.0
        };
        let r = (t + self.latency.fixed_delay + jitter).max(self.last_reaction);
        self.last_reaction = r;
        r
    }

    fn pcm(&mut self, t: f64, kind: IoKind, feature: usize, cause: usize) {
        self.events.push(IoEvent {
            t,
            source: IoSource::Pcm,
            kind,
            feature,
            cause: Some(cause),
        });
    }
}

/// Runs the robot/PCM exchange for `program`.
pub fn run_timeline(program: &MotionProgram, latency: &LatencyModel) -> Result<SyncTrace> {
    run_timeline_with(program, latency, &PcmConfig::default())
}

pub fn run_timeline_with(program: &MotionProgram, latency: &LatencyModel, cfg: &PcmConfig) -> Result<SyncTrace> {
    program.validate_motion()?;
    latency.validate()?;
    cfg.validate()?;
    let mut pcm = Pcm {
        latency,
        rng: ChaCha8Rng::seed_from_u64(latency.seed),
        last_reaction: 0.0,
        events: Vec::new(),
        feeding: false,
        cut_busy_until: f64::NEG_INFINITY,
        steps_total: 0,
        feed_history: vec![FeedState {
            t: 0.0,
            steps_issued: 0,
            steps_per_meter: cfg.steps_per_meter,
            state: FeedMode::Idle,
        }],
        cut_history: vec![CutState {
            t: 0.0,
            state: CutMode::Retracted,
            cycle_duration: cfg.cut_cycle,
        }],
    };
    let violation = |t: f64, detail: String| Error::ProtocolViolation { t, detail };

    let nf = program.features.len();
    let mut fed = vec![0.0f64; nf];
    let mut feeding_feature: Option<usize> = None;
    let mut cut_seen = vec![false; nf];
    let mut shift = 0.0;
    let steps = &program.steps;

    for (i, step) in steps.iter().enumerate() {
        let t = step.t + shift;
        // commanded feed follows the robot while both run
        if let (Some(f), true) = (feeding_feature, i > 0) {
            if step.feature == f && pcm.feeding {
                fed[f] += step.speed * (step.t - steps[i - 1].t);
            }
        }
        match step.event {
            StepEvent::FeedStart => {
                let f = step.feature;
                if feeding_feature.is_some() {
                    return Err(violation(t, format!("feed_start for feature {f} while already feeding")));
                }
                let e = pcm.robot(t, IoKind::FeedStart, f);
                let r = pcm.react(t);
                if r < pcm.cut_busy_until {
                    return Err(violation(r, format!("feed_start for feature {f} while the cutter is cycling")));
                }
                pcm.pcm(r, IoKind::FeedStart, f, e);
                pcm.feeding = true;
                pcm.feed_history.push(FeedState {
                    t: r,
                    steps_issued: pcm.steps_total,
                    steps_per_meter: cfg.steps_per_meter,
                    state: FeedMode::Feeding,
                });
                feeding_feature = Some(f);
                // robot holds until the acknowledgement
                shift += r - t;
                pcm.robot(r, IoKind::MotionStart, f);
            }
            StepEvent::FeedStop => {
                let f = step.feature;
                if feeding_feature != Some(f) {
                    return Err(violation(t, format!("feed_stop for feature {f} without a matching feed_start")));
                }
                pcm.robot(t, IoKind::MotionStop, f);
                let e = pcm.robot(t, IoKind::FeedStop, f);
                let r = pcm.react(t);
                // open-loop overrun at the last programmed speed
                fed[f] += step.speed * (r - t);
                pcm.pcm(r, IoKind::FeedStop, f, e);
                pcm.feeding = false;
                let steps_f = (fed[f] * cfg.steps_per_meter).round().max(0.0) as u64;
                fed[f] = steps_f as f64 / cfg.steps_per_meter;
                pcm.steps_total += steps_f;
                pcm.feed_history.push(FeedState {
                    t: r,
                    steps_issued: pcm.steps_total,
                    steps_per_meter: cfg.steps_per_meter,
                    state: FeedMode::Idle,
                });
                feeding_feature = None;
            }
            StepEvent::Cut => {
                let f = step.feature;
                // raised on arrival at the cut pose
                let raised = if i > 0 { steps[i - 1].t + shift } else { t };
                let e = pcm.robot(raised, IoKind::CutBegin, f);
                let r = pcm.react(raised);
                if pcm.feeding {
                    return Err(violation(r, format!("cut for feature {f} commanded while feeding")));
                }
                if r < pcm.cut_busy_until {
                    return Err(violation(r, format!("cut for feature {f} while the cutter is cycling")));
                }
                pcm.pcm(r, IoKind::CutBegin, f, e);
                let done = r + cfg.cut_cycle;
                pcm.cut_history.extend([
                    CutState {
                        t: r,
                        state: CutMode::Cutting,
                        cycle_duration: cfg.cut_cycle,
                    },
                    CutState {
                        t: r + cfg.cut_cycle / 2.0,
                        state: CutMode::Returning,
                        cycle_duration: cfg.cut_cycle,
                    },
                    CutState {
                        t: done,
                        state: CutMode::Retracted,
                        cycle_duration: cfg.cut_cycle,
                    },
                ]);
                pcm.pcm(done, IoKind::CutDone, f, e);
                pcm.cut_busy_until = done;
                cut_seen[f] = true;
                // robot leaves the cut pose only after cut_done
                shift += (done - t).max(0.0);
            }
            StepEvent::None | StepEvent::AnchorMark => {}
        }
    }

    let complete = feeding_feature.is_none() && cut_seen.iter().all(|&c| c);
    let features = (0..nf)
        .map(|f| FeatureFeed {
            feature: f,
            steps: (fed[f] * cfg.steps_per_meter).round() as u64,
            fed_length: fed[f],
            traversed_length: polyline_length(&program.laid_positions(f)),
        })
        .collect();
    let mut events = pcm.events;
    // stable: equal times keep emission order
    let mut order: Vec<usize> = (0..events.len()).collect();
    order.sort_by(|&a, &b| events[a].t.total_cmp(&events[b].t));
    let mut position = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    for e in &mut events {
        e.cause = e.cause.map(|c| position[c]);
    }
    let events = order.iter().map(|&i| events[i]).collect();
    let mut feed_history = pcm.feed_history;
    feed_history.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(SyncTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        program_digest: program.digest(),
        latency: latency.clone(),
        pcm: cfg.clone(),
        events,
        feed_history,
        cut_history: pcm.cut_history,
        features,
        complete,
    })
}

/// Signed over-feed (positive) or under-feed per feature, m.
pub fn feed_deficit(trace: &SyncTrace, program: &MotionProgram) -> Result<Vec<f64>> {
    if trace.program_digest != program.digest() {
        return Err(Error::InvalidInput("trace was produced from a different program".into()));
    }
    if !trace.complete || trace.features.len() != program.features.len() {
        return Err(Error::InvalidInput("trace is incomplete".into()));
    }
    Ok(trace.features.iter().map(|f| f.fed_length - f.traversed_length).collect())
}

/// Adds each feature's feed deficit to its trailing cut offset.
pub fn couple_to_simulator(trace: &SyncTrace, outcome: &PlacementOutcome) -> Result<PlacementOutcome> {
    if trace.program_digest != outcome.program_digest {
        return Err(Error::InvalidInput("trace and outcome come from different programs".into()));
    }
    if !trace.complete || trace.features.len() != outcome.features.len() {
        return Err(Error::InvalidInput("trace is incomplete".into()));
    }
    let mut out = outcome.clone();
    for (pf, ff) in out.features.iter_mut().zip(&trace.features) {
        let deficit = ff.fed_length - ff.traversed_length;
        pf.end_cut_offsets.1 += deficit;
        let length = pf.planned_length + pf.end_cut_offsets.0 + pf.end_cut_offsets.1;
        if !(length > 0.0) {
            return Err(Error::PlacementFailure {
                feature: pf.feature,
                arc_position: 0.0,
                mode: format!("under-feed of {:.6} m leaves no tape", -deficit),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Catalog;
    use crate::geometry::Design;
    use crate::planner::{plan, PlanParams, RobotLimits};
    use crate::simulator::{simulate, NoiseModel};

    fn line_program(speed: f64) -> MotionProgram {
        let params = PlanParams {
            speed,
            ..PlanParams::default()
        };
        let c = Catalog::builtin();
        plan(
            &Design::straight_line(0.15),
            c.tape("copper-6.35").unwrap(),
            c.substrate("acrylic").unwrap(),
            &params,
            &RobotLimits::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_latency_feeds_path_length() {
        let p = line_program(0.025);
        let trace = run_timeline(&p, &LatencyModel::zero()).unwrap();
        let d = feed_deficit(&trace, &p).unwrap();
        assert!(d[0].abs() <= 1.0 / DEFAULT_STEPS_PER_METER, "{d:?}");
        assert!((trace.features[0].traversed_length - 0.15).abs() < 1e-12);
    }

    #[test]
    fn stop_delay_overfeeds_by_speed_times_delay() {
        for (speed, expect) in [(0.1, 2.0e-3), (0.01, 0.2e-3)] {
            let p = line_program(speed);
            let trace = run_timeline(&p, &LatencyModel::fixed(0.02)).unwrap();
            let d = feed_deficit(&trace, &p).unwrap()[0];
            assert!((d - expect).abs() <= 1.0 / DEFAULT_STEPS_PER_METER, "{speed}: {d}");
        }
    }

    #[test]
    fn cut_during_feed_is_a_protocol_violation() {
        let mut p = line_program(0.025);
        let cut = p.steps.iter().position(|s| s.event == StepEvent::Cut).unwrap();
        p.steps[cut].event = StepEvent::None;
        let laid = p.laid_steps(0);
        p.steps[laid[laid.len() / 2]].event = StepEvent::Cut;
        let err = run_timeline(&p, &LatencyModel::zero()).unwrap_err();
        assert_eq!(err.kind(), "protocol-violation");
    }

    #[test]
    fn reactions_never_precede_causes() {
        let p = line_program(0.05);
        let lat = LatencyModel {
            fixed_delay: 0.005,
            jitter_sigma: 0.01,
            seed: 3,
        };
        let trace = run_timeline(&p, &lat).unwrap();
        assert!(trace.events.windows(2).all(|w| w[0].t <= w[1].t));
        for e in &trace.events {
            if let Some(c) = e.cause {
                assert!(trace.events[c].t <= e.t);
                assert_eq!(trace.events[c].source, IoSource::Robot);
            }
        }
        assert_eq!(trace, run_timeline(&p, &lat).unwrap());
    }

    #[test]
    fn coupling_adds_deficit_to_trailing_end() {
        let p = line_program(0.1);
        let c = Catalog::builtin();
        let (tape, sub) = (c.tape("copper-6.35").unwrap(), c.substrate("acrylic").unwrap());
        let outcome = simulate(&p, tape, sub, &NoiseModel::zero()).unwrap();
        let zero = run_timeline(&p, &LatencyModel::zero()).unwrap();
        let same = couple_to_simulator(&zero, &outcome).unwrap();
        assert!((same.features[0].end_cut_offsets.1 - outcome.features[0].end_cut_offsets.1).abs() <= 1e-5);
        let late = run_timeline(&p, &LatencyModel::fixed(0.02)).unwrap();
        let coupled = couple_to_simulator(&late, &outcome).unwrap();
        let delta = coupled.features[0].end_cut_offsets.1 - outcome.features[0].end_cut_offsets.1;
        assert!((delta - 2e-3).abs() <= 1.0 / DEFAULT_STEPS_PER_METER);

        let mut starved = late.clone();
        starved.features[0].fed_length = -1.0;
        assert_eq!(couple_to_simulator(&starved, &outcome).unwrap_err().kind(), "placement-failure");

        let other = line_program(0.05);
        let foreign = run_timeline(&other, &LatencyModel::zero()).unwrap();
        assert_eq!(couple_to_simulator(&foreign, &outcome).unwrap_err().kind(), "invalid-input");
    }
}
