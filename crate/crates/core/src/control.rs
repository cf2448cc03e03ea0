//! Object-level control from the current observation and the map.
//!
//! Discrete mode servos on one plan node at a time and hops to the next
//! node once the tracked segment looks as large as its map reference.
//! Continuous mode steers by the offsets of all matched segments, weighted
//! by their plan distance to the goal.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::MapGraph;
use crate::ingest::{FrameMeta, SegmentRecord};
use crate::localization::{best_node, frame_distance, localize_frame, localize_segments};
use crate::planning::{Plan, PlanStrategy, PlanningGraph};
use crate::vector::dot;

/// Path-length weighting used by continuous control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightFn {
    /// `1 / (1 + d)`
    Inverse,
    /// `exp(-rate * d)`
    Exponential { rate: f64 },
}

impl WeightFn {
    pub fn weight(self, path_len: u32) -> f64 {
        let d = f64::from(path_len);
        match self {
            WeightFn::Inverse => 1.0 / (1.0 + d),
            WeightFn::Exponential { rate } => (-rate * d).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    /// Minimum descriptor similarity for a segment to count as tracked.
    pub theta_track: f64,
    /// Query/reference area ratio at which a plan node counts as reached.
    pub rho_hop: f64,
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Forward speed in m/s while tracking.
    pub v_forward: f64,
    /// Frames on either side of the localized frame forming the submap.
    pub submap_window: usize,
    /// Control period in seconds.
    pub dt: f64,
    /// Normalized offset commanded while lost.
    pub explore_turn: f64,
    /// Seeds the turn direction while lost.
    pub explore_seed: u64,
    pub weight_fn: WeightFn,
}

impl Default for ControlParams {
    fn default() -> Self {
        ControlParams {
            theta_track: 0.5,
            rho_hop: 0.9,
            kp: 0.5,
            ki: 0.0,
            kd: 0.0,
            v_forward: 0.5,
            submap_window: 3,
            dt: 0.2,
            explore_turn: 0.5,
            explore_seed: 7,
            weight_fn: WeightFn::Inverse,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        use crate::error::HopmapError::Config;
        if self.rho_hop.is_nan() || self.rho_hop <= 0.0 {
            return Err(Config("rho_hop must be positive".into()));
        }
        if ![
            self.kp,
            self.ki,
            self.kd,
            self.v_forward,
            self.explore_turn,
            self.theta_track,
        ]
        .iter()
        .all(|g| g.is_finite())
        {
            return Err(Config("control gains must be finite".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Config("dt must be positive".into()));
        }
        Ok(())
    }

    /// Signed exploration command: the turn magnitude with a direction fixed
    /// by `explore_seed`.
    pub fn exploration_offset(&self) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.explore_seed);
        if rng.gen::<bool>() {
            self.explore_turn
        } else {
            -self.explore_turn
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlState {
    Lost,
    Track,
    Hop,
    Done,
}

impl ControlState {
    pub fn name(self) -> &'static str {
        match self {
            ControlState::Lost => "lost",
            ControlState::Track => "track",
            ControlState::Hop => "hop",
            ControlState::Done => "done",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub state: ControlState,
    /// Horizontal offset divided by half the image width, in [-1, 1].
    /// Positive means the target is right of centre.
    pub yaw_offset_norm: f64,
    pub forward: bool,
    /// Yaw rate in rad/s; zero until the PID stage fills it in.
    pub yaw_rate: f64,
}

impl ControlCommand {
    pub fn stop(state: ControlState) -> Self {
        ControlCommand {
            state,
            yaw_offset_norm: 0.0,
            forward: false,
            yaw_rate: 0.0,
        }
    }

    pub fn lost(p: &ControlParams) -> Self {
        ControlCommand {
            state: ControlState::Lost,
            yaw_offset_norm: p.exploration_offset(),
            forward: false,
            yaw_rate: 0.0,
        }
    }
}

/// One camera image worth of segments.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub meta: FrameMeta,
    pub segments: Vec<SegmentRecord>,
}

impl Observation {
    pub fn half_width(&self) -> f64 {
        f64::from(self.meta.image_width) / 2.0
    }

    /// Normalized horizontal offset of a pixel column from the image centre.
    pub fn offset_norm(&self, centroid_x: f64) -> f64 {
        let half = self.half_width();
        ((centroid_x - half) / half).clamp(-1.0, 1.0)
    }
}

/// One discrete-mode tick. Returns the command and the updated plan cursor.
pub fn discrete_step(
    plan: &Plan,
    cursor: usize,
    query: &Observation,
    g: &MapGraph,
    p: &ControlParams,
) -> (ControlCommand, usize) {
    if cursor >= plan.steps.len() {
        return (ControlCommand::stop(ControlState::Done), cursor);
    }
    let reference = &g.nodes[plan.steps[cursor]];
    let best = query
        .segments
        .iter()
        .map(|s| (s, dot(reference.descriptor(0), &s.descriptor)))
        .fold(None::<(&SegmentRecord, f64)>, |acc, (s, sim)| match acc {
            Some((_, b)) if sim <= b => acc,
            _ => Some((s, sim)),
        });
    let Some((seg, sim)) = best else {
        return (ControlCommand::lost(p), cursor);
    };
    if sim < p.theta_track {
        return (ControlCommand::lost(p), cursor);
    }
    let mut cmd = ControlCommand {
        state: ControlState::Track,
        yaw_offset_norm: query.offset_norm(seg.centroid_x),
        forward: true,
        yaw_rate: 0.0,
    };
    let mut next = cursor;
    if seg.area_px / reference.area_px >= p.rho_hop {
        next += 1;
        cmd.state = if next >= plan.steps.len() {
            cmd.forward = false;
            ControlState::Done
        } else {
            ControlState::Hop
        };
    }
    (cmd, next)
}

/// Plan cost from every node to a fixed goal.
#[derive(Clone, Debug)]
pub struct GoalCosts {
    pub goal: usize,
    pub costs: Vec<Option<u32>>,
}

impl GoalCosts {
    pub fn new(g: &MapGraph, goal: usize, strategy: PlanStrategy) -> Result<Self> {
        let pg = PlanningGraph::new(g, strategy)?;
        Ok(GoalCosts {
            goal,
            costs: pg.costs_from(goal)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousOutcome {
    pub command: ControlCommand,
    pub localized_frame: Option<usize>,
    /// Smallest plan cost to the goal over matched submap nodes.
    pub min_path_len: Option<u32>,
    /// `(query segment index, submap node, plan cost)` per used match.
    pub matches: Vec<(usize, usize, u32)>,
}

/// Weighted mean of normalized offsets, each weighted by its path length.
pub fn weighted_offset(offsets_and_lengths: &[(f64, u32)], weight_fn: WeightFn) -> f64 {
    let (num, den) = offsets_and_lengths
        .iter()
        .fold((0.0, 0.0), |(n, d), &(o, len)| {
            let w = weight_fn.weight(len);
            (n + w * o, d + w)
        });
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// One continuous-mode tick against precomputed goal costs.
pub fn continuous_step_with_costs(
    query: &Observation,
    g: &MapGraph,
    goal: &GoalCosts,
    p: &ControlParams,
) -> Result<ContinuousOutcome> {
    let lost = |frame| ContinuousOutcome {
        command: ControlCommand::lost(p),
        localized_frame: frame,
        min_path_len: None,
        matches: Vec::new(),
    };
    let global = localize_segments(&query.segments, g, 0, p.theta_track)?;
    let Some(frame) = localize_frame(&global, g) else {
        return Ok(lost(None));
    };
    let n = g.num_frames();
    let pano = g.config.pano_wrap;
    let submap: Vec<_> = g
        .nodes
        .iter()
        .filter(|m| frame_distance(m.frame_id, frame, n, pano) <= p.submap_window)
        .collect();

    let mut matches = Vec::new();
    let mut samples = Vec::new();
    for (i, seg) in query.segments.iter().enumerate() {
        let Some((node, sim)) = best_node(&seg.descriptor, submap.iter().copied(), 0) else {
            continue;
        };
        if sim < p.theta_track {
            continue;
        }
        let Some(d) = goal.costs[node] else { continue };
        matches.push((i, node, d));
        samples.push((query.offset_norm(seg.centroid_x), d));
    }
    if samples.is_empty() {
        return Ok(lost(Some(frame)));
    }
    let min_d = samples.iter().map(|s| s.1).min();
    let done = min_d == Some(0);
    Ok(ContinuousOutcome {
        command: ControlCommand {
            state: if done {
                ControlState::Done
            } else {
                ControlState::Track
            },
            yaw_offset_norm: weighted_offset(&samples, p.weight_fn),
            forward: !done,
            yaw_rate: 0.0,
        },
        localized_frame: Some(frame),
        min_path_len: min_d,
        matches,
    })
}

pub fn continuous_step(
    query: &Observation,
    g: &MapGraph,
    goal: usize,
    p: &ControlParams,
    strategy: PlanStrategy,
) -> Result<ControlCommand> {
    let costs = GoalCosts::new(g, goal, strategy)?;
    Ok(continuous_step_with_costs(query, g, &costs, p)?.command)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: Option<f64>,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = PidState::default();
    }
}

/// PID on the normalized offset; with `ki = kd = 0` this is `kp * offset`.
pub fn pid_yaw(offset_norm: f64, p: &ControlParams, state: &mut PidState) -> f64 {
    state.integral += offset_norm * p.dt;
    let derivative = state
        .prev_error
        .map_or(0.0, |prev| (offset_norm - prev) / p.dt);
    state.prev_error = Some(offset_norm);
    p.kp * offset_norm + p.ki * state.integral + p.kd * derivative
}

/// One row of the per-tick command log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandLogEntry {
    pub tick: usize,
    pub state: ControlState,
    pub yaw_offset_norm: f64,
    pub yaw_rate: f64,
    pub forward: bool,
    /// Plan cursor in discrete mode.
    pub cursor: Option<usize>,
    /// Minimum matched path length in continuous mode.
    pub min_d: Option<u32>,
}

pub fn command_log_csv(log: &[CommandLogEntry]) -> String {
    let mut out = String::from("tick,state,yaw_offset_norm,yaw_rate,forward,cursor,min_d\n");
    let opt = |v: Option<String>| v.unwrap_or_default();
    for e in log {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{},{},{}",
            e.tick,
            e.state.name(),
            e.yaw_offset_norm,
            e.yaw_rate,
            e.forward,
            opt(e.cursor.map(|c| c.to_string())),
            opt(e.min_d.map(|d| d.to_string())),
        );
    }
    out
}
