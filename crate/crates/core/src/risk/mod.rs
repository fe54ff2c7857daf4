//! Three-stage particle risk engine.
//!
//! 1. Sample particles `{x_e(0), a_e, v_o, T}` and integrate the ego forward
//!    to get one point of its forward reachable set per particle.
//! 2. Project each ego endpoint onto every candidate lane and integrate the
//!    other-agent model backwards from it: the result is the trajectory a
//!    hypothetical intruder must have followed to meet the ego there.
//! 3. Score each particle by how much of that intruder trajectory lies in
//!    observed free space. A trajectory that is fully visible cannot hide a
//!    vehicle, so the particle is safe.

mod dump;
mod observe;
mod reach;
mod sampling;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsError, EgoControl, EgoState, OtherControl, Trajectory};
use crate::geometry::{Lane, ObservablePolygon, Pose2D};
use crate::Execution;

pub use dump::{write_particles_jsonl, ParticleRecord};
pub use observe::{observability_weight, trajectory_visibility, FreeSpace, TrackedFreeSpace};
pub use reach::{compute_brs_o, compute_frs_e};
pub use sampling::sample_particles;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RiskError {
    #[error("invalid risk configuration: {0}")]
    InvalidConfig(String),
    #[error("stage {stage} requires {missing}")]
    StageOrder {
        stage: &'static str,
        missing: &'static str,
    },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Sampling and integration parameters of the risk engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskConfig {
    /// Particles per iteration.
    pub n_particles: usize,
    /// Longest sampled horizon `T_f` (s).
    pub forecast_horizon: f64,
    /// Replanning period `T_r` (s).
    pub replan_period: f64,
    /// Std-dev of the ego acceleration transition kernel (m/s²).
    pub sigma_theta_e: f64,
    /// Std-dev of the other-agent speed transition kernel (m/s).
    pub sigma_theta_o: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Integration step (s).
    pub dt: f64,
    /// Share of particles redrawn from the uniform prior each iteration.
    pub fresh_fraction: f64,
    /// Half-widths `(s, v)` of the box the ego initial state is drawn from.
    pub ego_init_half_widths: [f64; 2],
    /// Extra lateral reach (m) beyond half the lane width within which an
    /// ego endpoint still counts as lying on another lane.
    pub lateral_margin: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            n_particles: 1000,
            forecast_horizon: 3.0,
            replan_period: 0.2,
            sigma_theta_e: 0.5,
            sigma_theta_o: 1.0,
            a_min: -6.0,
            a_max: 3.0,
            v_min: 3.0,
            v_max: 13.0,
            dt: 0.05,
            fresh_fraction: 0.05,
            ego_init_half_widths: [0.0, 0.0],
            lateral_margin: 1.5,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<(), RiskError> {
        let bad = |m: &str| Err(RiskError::InvalidConfig(m.to_string()));
        if self.n_particles < 1 {
            return bad("n_particles must be at least 1");
        }
        if !(self.forecast_horizon > 0.0 && self.forecast_horizon.is_finite()) {
            return bad("forecast_horizon must be positive");
        }
        if !(self.replan_period > 0.0 && self.replan_period <= self.forecast_horizon) {
            return bad("replan_period must lie in (0, forecast_horizon]");
        }
        if !(self.sigma_theta_e > 0.0 && self.sigma_theta_o > 0.0) {
            return bad("transition kernel widths must be positive");
        }
        if !(self.a_min < self.a_max) {
            return bad("a_min must be below a_max");
        }
        if !(self.v_min >= 0.0 && self.v_min < self.v_max) {
            return bad("speed bounds must satisfy 0 <= v_min < v_max");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(0.0..=1.0).contains(&self.fresh_fraction) {
            return bad("fresh_fraction must lie in [0, 1]");
        }
        if self.ego_init_half_widths.iter().any(|h| !(*h >= 0.0)) {
            return bad("ego_init_half_widths must be non-negative");
        }
        if !(self.lateral_margin >= 0.0) {
            return bad("lateral_margin must be non-negative");
        }
        Ok(())
    }

    pub fn clamp_accel(&self, a: f64) -> f64 {
        a.clamp(self.a_min, self.a_max)
    }

    pub fn clamp_speed(&self, v: f64) -> f64 {
        v.clamp(self.v_min, self.v_max)
    }
}

/// Ego endpoint of one particle's forward integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrsEndpoint {
    pub state: EgoState,
    pub pose: Pose2D,
    /// The endpoint ran past the lane end and was held there.
    pub clamped: bool,
}

/// Hypothetical intruder trajectory on one candidate lane, forward-ordered
/// and ending at the ego endpoint's projection.
#[derive(Debug, Clone, PartialEq)]
pub struct BrsTrack {
    /// Arc length on the candidate lane where the intruder meets the ego.
    pub collision_s: f64,
    pub trajectory: Trajectory<1>,
}

impl BrsTrack {
    /// Intruder arc length at `t = 0`.
    pub fn start_s(&self) -> f64 {
        self.trajectory.start()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub ego_init: EgoState,
    pub theta_e: EgoControl,
    pub theta_o: OtherControl,
    pub horizon: f64,
    /// Index of the previous-iteration particle this one was drawn around.
    pub parent: Option<usize>,
    pub frs: Option<FrsEndpoint>,
    /// One entry per candidate lane; `None` where the endpoint is off-lane.
    /// Empty until the backward stage has run.
    pub brs: Vec<Option<BrsTrack>>,
    pub w_s: f64,
    pub w_d: f64,
    pub w: f64,
}

impl Particle {
    pub fn new(ego_init: EgoState, theta_e: f64, theta_o: f64, horizon: f64) -> Self {
        Self {
            ego_init,
            theta_e: EgoControl { a: theta_e },
            theta_o: OtherControl { v: theta_o },
            horizon,
            parent: None,
            frs: None,
            brs: Vec::new(),
            w_s: 1.0,
            w_d: 1.0,
            w: 1.0,
        }
    }

    /// Copy of the sampled hypothesis without derived data.
    pub fn hypothesis(&self) -> Particle {
        Particle {
            parent: self.parent,
            ..Particle::new(self.ego_init, self.theta_e.a, self.theta_o.v, self.horizon)
        }
    }

    pub fn has_brs(&self) -> bool {
        self.brs.iter().any(Option::is_some)
    }
}

/// Progress of a particle set through the stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Sampled,
    Forward,
    Backward,
    Weighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub iteration: usize,
    /// Seed the per-particle streams of this iteration were derived from.
    pub seed: u64,
    pub stage: Stage,
}

impl ParticleSet {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn min_w_s(&self) -> f64 {
        self.particles.iter().map(|p| p.w_s).fold(1.0, f64::min)
    }
}

/// Runs sampling and all three stages against a given free space.
#[allow(clippy::too_many_arguments)]
pub fn assess<R: Rng + ?Sized, F: FreeSpace + Sync>(
    prev: Option<&ParticleSet>,
    ego_now: EgoState,
    ego_lane: &Lane,
    other_lanes: &[Lane],
    free_space: &F,
    cfg: &RiskConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<ParticleSet, RiskError> {
    let mut set = sample_particles(prev, ego_now, cfg, rng, exec)?;
    compute_frs_e(&mut set, ego_lane, cfg, exec)?;
    compute_brs_o(&mut set, other_lanes, cfg, exec)?;
    observability_weight(&mut set, free_space, exec)?;
    Ok(set)
}

/// [`assess`] with a bare observable polygon.
#[allow(clippy::too_many_arguments)]
pub fn assess_polygon<R: Rng + ?Sized>(
    prev: Option<&ParticleSet>,
    ego_now: EgoState,
    ego_lane: &Lane,
    other_lanes: &[Lane],
    polygon: &ObservablePolygon,
    cfg: &RiskConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<ParticleSet, RiskError> {
    assess(
        prev,
        ego_now,
        ego_lane,
        other_lanes,
        polygon,
        cfg,
        rng,
        exec,
    )
}
