//! Closed-loop navigation trials.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{step_agent, AgentPose, World, TRIAL_STREAM};
use crate::control::{
    continuous_step_with_costs, discrete_step, pid_yaw, CommandLogEntry, ControlCommand,
    ControlParams, ControlState, GoalCosts, Observation, PidState,
};
use crate::error::{HopmapError, Result};
use crate::graph::MapGraph;
use crate::localization::localize_segments;
use crate::planning::{Plan, PlanStrategy, PlanningGraph};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Discrete,
    Continuous,
}

impl ControlMode {
    pub fn name(self) -> &'static str {
        match self {
            ControlMode::Discrete => "discrete",
            ControlMode::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for ControlMode {
    type Err = HopmapError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(ControlMode::Discrete),
            "continuous" => Ok(ControlMode::Continuous),
            other => Err(HopmapError::Config(format!(
                "unknown control mode {other:?} (expected discrete or continuous)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub mode: ControlMode,
    pub goal: usize,
    pub success: bool,
    pub steps_taken: usize,
    /// Smallest plan cost to the goal over segments matched in the final
    /// observation; `None` when nothing matched.
    pub final_min_path_len: Option<u32>,
    pub final_pose: AgentPose,
    /// The plan followed in discrete mode.
    pub plan: Option<Plan>,
    pub command_log: Vec<CommandLogEntry>,
}

/// Min plan cost to the goal over the submap matches of one observation.
fn min_path_len(
    obs: &Observation,
    map: &MapGraph,
    costs: &GoalCosts,
    params: &ControlParams,
) -> Result<Option<u32>> {
    Ok(continuous_step_with_costs(obs, map, costs, params)?.min_path_len)
}

/// Discrete mode plans from the matched node closest (in plan cost) to the
/// goal; ties go to the stronger match, then the lower node id.
fn discrete_plan(
    obs: &Observation,
    map: &MapGraph,
    pg: &PlanningGraph,
    costs: &GoalCosts,
    params: &ControlParams,
) -> Result<Option<Plan>> {
    let matches = localize_segments(&obs.segments, map, 0, params.theta_track)?;
    let best = matches
        .iter()
        .filter_map(|m| costs.costs[m.map_node].map(|c| (c, m)))
        .min_by(|(ca, a), (cb, b)| {
            ca.cmp(cb)
                .then(b.similarity.total_cmp(&a.similarity))
                .then(a.map_node.cmp(&b.map_node))
        });
    match best {
        Some((_, m)) => pg.plan(m.map_node, costs.goal).map(Some),
        None => Ok(None),
    }
}

/// Runs observe, control and step until the controller reports done or
/// `max_steps` ticks have elapsed. Success requires done with a final
/// minimum path length of zero. While lost the agent sweeps: whenever the
/// heading limit blocks the exploration turn, the turn reverses and the
/// agent creeps one step forward.
#[allow(clippy::too_many_arguments)]
pub fn run_navigation_trial(
    world: &World,
    map: &MapGraph,
    start: AgentPose,
    goal: usize,
    mode: ControlMode,
    max_steps: usize,
    params: &ControlParams,
    strategy: PlanStrategy,
) -> Result<TrialResult> {
    params.validate()?;
    if goal >= map.num_nodes() {
        return Err(HopmapError::UnknownNode(goal));
    }
    let pg = PlanningGraph::new(map, strategy)?;
    let costs = GoalCosts {
        goal,
        costs: pg.costs_from(goal)?,
    };

    let mut pose = start;
    let mut pid = PidState::default();
    let mut log = Vec::new();
    let mut plan: Option<Plan> = None;
    let mut cursor = 0usize;
    let mut done_obs = None;
    let mut sweep = 1.0;

    for tick in 0..max_steps {
        let obs = world.observe_stream(&pose, TRIAL_STREAM, tick);
        let (mut cmd, min_d) = match mode {
            ControlMode::Continuous => {
                let out = continuous_step_with_costs(&obs, map, &costs, params)?;
                (out.command, out.min_path_len)
            }
            ControlMode::Discrete => {
                if plan.is_none() {
                    plan = discrete_plan(&obs, map, &pg, &costs, params)?;
                }
                match &plan {
                    Some(p) => {
                        let (cmd, next) = discrete_step(p, cursor, &obs, map, params);
                        cursor = next;
                        (cmd, None)
                    }
                    None => (ControlCommand::lost(params), None),
                }
            }
        };
        if cmd.state == ControlState::Lost {
            cmd.yaw_offset_norm *= sweep;
        }
        if cmd.state != ControlState::Done {
            cmd.yaw_rate = pid_yaw(cmd.yaw_offset_norm, params, &mut pid);
        }
        log.push(CommandLogEntry {
            tick,
            state: cmd.state,
            yaw_offset_norm: cmd.yaw_offset_norm,
            yaw_rate: cmd.yaw_rate,
            forward: cmd.forward,
            cursor: plan.as_ref().map(|_| cursor),
            min_d,
        });
        if cmd.state == ControlState::Done {
            done_obs = Some(obs);
            break;
        }
        let mut next = step_agent(world, &pose, &cmd, params.v_forward, params.dt);
        if cmd.state == ControlState::Lost && next.yaw == pose.yaw && cmd.yaw_rate != 0.0 {
            sweep = -sweep;
            let creep = ControlCommand {
                forward: true,
                yaw_rate: 0.0,
                ..cmd
            };
            next = step_agent(world, &pose, &creep, params.v_forward, params.dt);
        }
        pose = next;
    }

    let steps_taken = log.len();
    let done = done_obs.is_some();
    let final_obs =
        done_obs.unwrap_or_else(|| world.observe_stream(&pose, TRIAL_STREAM, steps_taken));
    let final_min_path_len = min_path_len(&final_obs, map, &costs, params)?;
    Ok(TrialResult {
        mode,
        goal,
        success: done && final_min_path_len == Some(0),
        steps_taken,
        final_min_path_len,
        final_pose: pose,
        plan,
        command_log: log,
    })
}

/// A start pose on the mapping traverse and a goal node some frames ahead.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialPair {
    pub start_frame: usize,
    pub goal_frame: usize,
    pub start: AgentPose,
    pub goal: usize,
}

/// Seeded start/goal pairs. The start frame is uniform over frames that
/// leave room for a goal at least `min_gap` frames ahead; the goal frame is
/// uniform over the remaining frames and the goal is that frame's largest
/// segment (lowest id on ties).
pub fn benchmark_pairs(
    world: &World,
    map: &MapGraph,
    n: usize,
    min_gap: usize,
    seed: u64,
) -> Result<Vec<TrialPair>> {
    let frames = map.num_frames();
    if frames <= min_gap {
        return Err(HopmapError::Config(format!(
            "a {frames}-frame map cannot hold pairs {min_gap} frames apart"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let start_frame = rng.gen_range(0..frames - min_gap);
        let goal_frame = rng.gen_range(start_frame + min_gap..frames);
        let goal = map
            .frame_nodes(goal_frame)
            .iter()
            .fold(None::<&crate::graph::MapNode>, |best, n| match best {
                Some(b) if n.area_px <= b.area_px => Some(b),
                _ => Some(n),
            })
            .ok_or(HopmapError::EmptyFrame {
                frame_id: goal_frame,
            })?
            .node_id;
        pairs.push(TrialPair {
            start_frame,
            goal_frame,
            start: world.traverse_pose(start_frame, 0.0),
            goal,
        });
    }
    Ok(pairs)
}

pub fn trial_results_csv(results: &[TrialResult]) -> String {
    let mut out =
        String::from("trial,mode,goal,success,steps_taken,final_min_path_len,final_x,final_yaw\n");
    for (i, r) in results.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{:.6},{:.6}",
            r.mode.name(),
            r.goal,
            r.success,
            r.steps_taken,
            r.final_min_path_len
                .map(|d| d.to_string())
                .unwrap_or_default(),
            r.final_pose.x,
            r.final_pose.yaw,
        );
    }
    out
}
