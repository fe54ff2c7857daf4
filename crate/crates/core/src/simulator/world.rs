use super::{footprint, Scenario, SimConfig, SimError};
use crate::dynamics::{propagate, EgoControl, EgoModel, EgoState};
use crate::geometry::{obb_intersect, Lane, ObbBox};

/// Ground-truth state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub ego: EgoState,
    /// Arc length of each agent on its lane, in scenario order.
    pub agents_s: Vec<f64>,
    /// Latches once any agent footprint touches the ego footprint.
    pub collided: bool,
    /// Latches once the ego reaches the goal.
    pub reached_goal: bool,
}

/// Scenario with its lanes resolved, ready to step.
#[derive(Debug, Clone)]
pub struct World<'a> {
    pub scenario: &'a Scenario,
    pub cfg: &'a SimConfig,
    pub ego_lane: &'a Lane,
    pub agent_lanes: Vec<&'a Lane>,
}

impl<'a> World<'a> {
    pub fn new(scenario: &'a Scenario, cfg: &'a SimConfig) -> Result<Self, SimError> {
        scenario.validate()?;
        cfg.validate()?;
        let ego_lane = scenario.map.lane(&scenario.ego_route.lane_id)?;
        let agent_lanes = scenario
            .agents
            .iter()
            .map(|a| scenario.map.lane(&a.lane_id))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            scenario,
            cfg,
            ego_lane,
            agent_lanes,
        })
    }

    /// State at `t = 0`, with the flags already evaluated.
    pub fn initial_state(&self) -> Result<WorldState, SimError> {
        let mut state = WorldState {
            t: 0.0,
            ego: EgoState::new(self.scenario.ego_route.start_s, self.scenario.ego_start_v),
            agents_s: self.scenario.agents.iter().map(|a| a.start_s).collect(),
            collided: false,
            reached_goal: false,
        };
        self.evaluate(&mut state)?;
        Ok(state)
    }

    pub fn ego_box(&self, state: &WorldState) -> Result<ObbBox, SimError> {
        footprint(self.ego_lane, state.ego.s, self.cfg, 0.0)
    }

    pub fn agent_boxes(&self, state: &WorldState) -> Result<Vec<ObbBox>, SimError> {
        self.agent_lanes
            .iter()
            .zip(&state.agents_s)
            .map(|(lane, s)| footprint(lane, *s, self.cfg, 0.0))
            .collect()
    }

    /// Agent arc lengths at time `t`; agents never react, so this is exact.
    pub fn agents_at(&self, t: f64) -> Vec<f64> {
        self.scenario
            .agents
            .iter()
            .map(|a| a.start_s + a.speed * t)
            .collect()
    }

    fn evaluate(&self, state: &mut WorldState) -> Result<(), SimError> {
        let ego_box = self.ego_box(state)?;
        if !state.collided {
            state.collided = self
                .agent_boxes(state)?
                .iter()
                .any(|b| obb_intersect(&ego_box, b));
        }
        if !state.reached_goal {
            state.reached_goal = state.ego.s >= self.scenario.ego_route.goal_s;
        }
        Ok(())
    }

    /// Advances by `dt` holding `command`.
    pub fn step(
        &self,
        state: &WorldState,
        command: EgoControl,
        dt: f64,
    ) -> Result<WorldState, SimError> {
        let model = EgoModel::new(self.ego_lane);
        let ego = propagate(&model, state.ego.into(), command, dt, dt)?;
        let t = state.t + dt;
        let mut next = WorldState {
            t,
            ego: EgoState::from(ego),
            agents_s: self.agents_at(t),
            collided: state.collided,
            reached_goal: state.reached_goal,
        };
        self.evaluate(&mut next)?;
        Ok(next)
    }
}
