use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Scenario, Settings, SimError, World, WorldState};
use crate::dynamics::EgoControl;
use crate::geometry::{cast_rays, Lane, ObbBox, Vec2};
use crate::planner::{PlanStep, Planner};
use crate::risk::TrackedFreeSpace;
use crate::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Collision,
    GoalReached,
    Timeout,
}

/// One trace row per simulation step. `cmd_a` is the command held over the
/// following step; `min_ws` and `n_clusters` describe the latest plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub ego_s: f64,
    pub ego_v: f64,
    pub cmd_a: f64,
    pub ego_x: f64,
    pub ego_y: f64,
    pub min_ws: f64,
    pub n_clusters: usize,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
    /// Agent arc lengths per row; not part of the CSV.
    pub agents_s: Vec<Vec<f64>>,
}

impl EpisodeTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub n_agents: usize,
    pub outcome: Outcome,
    /// Simulated time at termination (s).
    pub time: f64,
    pub terminal_speed: f64,
    pub min_command: f64,
    pub planner_calls: usize,
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub summary: EpisodeSummary,
    pub trace: EpisodeTrace,
}

/// What the ego sensor sees at one instant.
#[derive(Debug, Clone)]
pub struct Perception {
    pub free: TrackedFreeSpace,
    /// Indices of agents hit by at least one ray.
    pub detected: Vec<usize>,
}

/// Casts the sensor rays against buildings and agent bodies. Detected
/// agents on lanes crossing the ego route also block the stretch of lane
/// they will sweep within the occupancy horizon.
pub fn perceive(
    world: &World<'_>,
    state: &WorldState,
    conflicting: &[Lane],
) -> Result<Perception, SimError> {
    let cfg = world.cfg;
    let origin = world.ego_lane.extrapolated_pose(state.ego.s).position();
    let buildings = &world.scenario.map.occluders;
    let agent_boxes = world.agent_boxes(state)?;
    let mut occluders: Vec<Vec<Vec2>> = buildings.clone();
    // an agent body around the sensor (only possible mid-collision) is skipped
    let mut owner = Vec::with_capacity(agent_boxes.len());
    for (j, b) in agent_boxes.iter().enumerate() {
        if !b.contains(origin) {
            occluders.push(b.corners().to_vec());
            owner.push(j);
        }
    }
    let (polygon, hits) = cast_rays(origin, &occluders, cfg.sensor_range, cfg.n_rays)?;
    let mut detected: Vec<usize> = hits
        .iter()
        .flatten()
        .filter(|&&k| k >= buildings.len())
        .map(|&k| owner[k - buildings.len()])
        .collect();
    detected.sort_unstable();
    detected.dedup();

    let mut occupied = Vec::new();
    if cfg.track_visible_agents {
        for &j in &detected {
            let lane = world.agent_lanes[j];
            if !conflicting.iter().any(|l| l.id() == lane.id()) {
                continue;
            }
            let s = state.agents_s[j];
            let v = world.scenario.agents[j].speed;
            let from = s - 0.5 * cfg.vehicle_length;
            let to = s + 0.5 * cfg.vehicle_length + v * cfg.occupancy_horizon;
            occupied.extend(sweep_boxes(lane, from, to, 0.5 * lane.width())?);
        }
    }
    Ok(Perception {
        free: TrackedFreeSpace { polygon, occupied },
        detected,
    })
}

/// Boxes of at most 4 m covering the lane between two arc lengths.
fn sweep_boxes(lane: &Lane, from: f64, to: f64, half_width: f64) -> Result<Vec<ObbBox>, SimError> {
    let piece = 4.0;
    let n = ((to - from) / piece).ceil().max(1.0) as usize;
    let len = (to - from) / n as f64;
    (0..n)
        .map(|k| {
            let pose = lane.extrapolated_pose(from + (k as f64 + 0.5) * len);
            ObbBox::new(
                pose.position(),
                (0.5 * len + 0.05, half_width),
                pose.heading,
            )
            .map_err(SimError::from)
        })
        .collect()
}

/// Called with the simulation time and the plan after every replan.
pub type Observer<'a> = &'a mut dyn FnMut(f64, &PlanStep);

/// Closed loop: replan every `T_r` on fresh perception, hold the command
/// in between, stop on collision, goal or `max_time`.
///
/// `observer` sees every planner call, e.g. to dump particles.
pub fn run_episode(
    scenario: &Scenario,
    settings: &Settings,
    exec: Execution,
    mut observer: Option<Observer<'_>>,
) -> Result<EpisodeResult, SimError> {
    let Settings { risk, planner, sim } = settings;
    let world = World::new(scenario, sim)?;
    let conflicting = scenario.map.conflicting_lanes(world.ego_lane);
    let mut planner = Planner::new(risk.clone(), planner.clone(), scenario.seed, exec)?;
    let replan_every = ((risk.replan_period / sim.sim_dt).round() as usize).max(1);
    let max_steps = (sim.max_time / sim.sim_dt).round() as usize;

    let mut state = world.initial_state()?;
    let mut trace = EpisodeTrace::default();
    let mut command = EgoControl { a: 0.0 };
    let (mut min_ws, mut n_clusters) = (1.0, 0);
    let (mut calls, mut fallbacks) = (0, 0);
    let mut min_command = f64::INFINITY;
    let mut k = 0usize;

    let outcome = loop {
        let outcome = if state.collided {
            Some(Outcome::Collision)
        } else if state.reached_goal {
            Some(Outcome::GoalReached)
        } else if k >= max_steps {
            Some(Outcome::Timeout)
        } else {
            None
        };
        if outcome.is_none() && k.is_multiple_of(replan_every) {
            let seen = perceive(&world, &state, &conflicting)?;
            let step = planner.step(state.ego, world.ego_lane, &conflicting, &seen.free)?;
            command = step.command;
            min_ws = step.min_w_s;
            n_clusters = step.clusters.len();
            calls += 1;
            fallbacks += usize::from(step.fallback.is_some());
            if let Some(obs) = observer.as_mut() {
                obs(state.t, &step);
            }
        }
        let pose = world.ego_lane.extrapolated_pose(state.ego.s);
        trace.rows.push(TraceRow {
            t: state.t,
            ego_s: state.ego.s,
            ego_v: state.ego.v,
            cmd_a: command.a,
            ego_x: pose.x,
            ego_y: pose.y,
            min_ws,
            n_clusters,
            collided: state.collided,
        });
        trace.agents_s.push(state.agents_s.clone());
        if let Some(o) = outcome {
            break o;
        }
        min_command = min_command.min(command.a);
        state = world.step(&state, command, sim.sim_dt)?;
        k += 1;
    };

    Ok(EpisodeResult {
        summary: EpisodeSummary {
            seed: scenario.seed,
            n_agents: scenario.agents.len(),
            outcome,
            time: state.t,
            terminal_speed: state.ego.v,
            min_command: if min_command.is_finite() {
                min_command
            } else {
                0.0
            },
            planner_calls: calls,
            fallbacks,
        },
        trace,
    })
}
