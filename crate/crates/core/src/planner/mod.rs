//! Turns weighted particles into one commanded acceleration.
//!
//! Each replanning call weights the assessed particles by safety and by
//! closeness to the desired control, resamples, clusters the surviving
//! accelerations and commands the centroid of the most decelerating
//! cluster. The resampled set seeds the next call.

mod dbscan;
mod resample;
mod weights;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{EgoControl, EgoModel, EgoState};
use crate::geometry::Lane;
use crate::risk::{assess, FreeSpace, ParticleSet, RiskConfig, RiskError};
use crate::Execution;

pub use dbscan::{cluster_actions, ActionCluster};
pub use resample::{resample, systematic_indices};
pub use weights::{combine_weights, desired_weight};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("weight vectors differ in length ({w_s} vs {w_d})")]
    LengthMismatch { w_s: usize, w_d: usize },
    #[error("all particle weights are zero")]
    DegenerateWeights,
    #[error("every action is noise")]
    NoClusters,
    #[error(transparent)]
    Risk(#[from] RiskError),
}

/// Which cluster centroid becomes the command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterChoice {
    #[default]
    MostDeceleration,
    MostAcceleration,
}

impl ClusterChoice {
    /// Picks the extreme centroid; ties go to the larger cluster, then to
    /// the earlier one. Returns `None` for an empty list.
    pub fn select(self, clusters: &[ActionCluster]) -> Option<EgoControl> {
        let key = |c: &ActionCluster| match self {
            ClusterChoice::MostDeceleration => c.centroid_a,
            ClusterChoice::MostAcceleration => -c.centroid_a,
        };
        let mut best: Option<&ActionCluster> = None;
        for c in clusters {
            best = match best {
                Some(b) if key(b) < key(c) || (key(b) == key(c) && b.len() >= c.len()) => Some(b),
                _ => Some(c),
            };
        }
        best.map(|c| EgoControl { a: c.centroid_a })
    }
}

/// Centroid of the most decelerating cluster.
pub fn select_action(clusters: &[ActionCluster]) -> Option<EgoControl> {
    ClusterChoice::MostDeceleration.select(clusters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Scale of the desired-control weight (m/s²).
    pub sigma_u: f64,
    /// Mixing constant of the final weight.
    pub epsilon: f64,
    pub target_speed: f64,
    /// Proportional speed gain (1/s).
    pub k_p: f64,
    /// Deceleration used to plan the stop at a stopline (m/s²).
    pub comfort_decel: f64,
    /// DBSCAN radius in acceleration space (m/s²).
    pub dbscan_eps: f64,
    /// DBSCAN density threshold; `max(5, N/100)` when unset.
    pub dbscan_min_pts: Option<usize>,
    /// Arc length of a stopline on the ego lane.
    pub stopline_s: Option<f64>,
    pub cluster_choice: ClusterChoice,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            sigma_u: 0.5,
            epsilon: 1e-4,
            target_speed: 9.0,
            k_p: 1.0,
            comfort_decel: 2.5,
            dbscan_eps: 0.3,
            dbscan_min_pts: None,
            stopline_s: None,
            cluster_choice: ClusterChoice::MostDeceleration,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::InvalidConfig(m.to_string()));
        if !(self.sigma_u > 0.0 && self.sigma_u.is_finite()) {
            return bad("sigma_u must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.target_speed > 0.0 && self.target_speed.is_finite()) {
            return bad("target_speed must be positive");
        }
        if !(self.k_p >= 0.0 && self.comfort_decel > 0.0) {
            return bad("k_p must be non-negative and comfort_decel positive");
        }
        if !(self.dbscan_eps > 0.0) {
            return bad("dbscan_eps must be positive");
        }
        if self.dbscan_min_pts == Some(0) {
            return bad("dbscan_min_pts must be at least 1");
        }
        if self.stopline_s.is_some_and(|s| !s.is_finite()) {
            return bad("stopline_s must be finite");
        }
        Ok(())
    }

    pub fn min_pts(&self, n_particles: usize) -> usize {
        self.dbscan_min_pts.unwrap_or((n_particles / 100).max(5))
    }
}

/// Desired acceleration: a constant-deceleration stop when a stopline is
/// ahead and close enough that stopping needs more than half the comfort
/// deceleration, otherwise a saturated proportional speed controller.
pub fn desired_control(ego: EgoState, cfg: &PlannerConfig, a_min: f64, a_max: f64) -> EgoControl {
    if let Some(stop) = cfg.stopline_s {
        let gap = stop - ego.s;
        if gap > 0.0 {
            let demand = ego.v * ego.v / (2.0 * gap);
            if demand > 0.5 * cfg.comfort_decel {
                return EgoControl {
                    a: (-demand).clamp(a_min, 0.0),
                };
            }
        }
    }
    EgoControl {
        a: (cfg.k_p * (cfg.target_speed - ego.v)).clamp(a_min, a_max),
    }
}

/// Why the command did not come from a cluster centroid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    /// No particle had positive weight; brake as hard as allowed.
    MaxBraking,
    /// Every resampled action was DBSCAN noise; weighted mean action.
    WeightedMean,
}

#[derive(Debug, Clone)]
pub struct PlanStep {
    pub command: EgoControl,
    /// Resampled hypotheses, parents of the next call's particles.
    pub particles: ParticleSet,
    /// The fully weighted set before resampling.
    pub assessed: ParticleSet,
    pub clusters: Vec<ActionCluster>,
    pub min_w_s: f64,
    pub fallback: Option<Fallback>,
}

/// Mean acceleration actually realized while holding `a` for `hold` from
/// speed `v`. Braking harder than `v / hold` ends the period at rest just
/// the same, so at standstill every braking hypothesis means holding still.
pub fn held_acceleration(a: f64, v: f64, hold: f64) -> f64 {
    a.max(-v.max(0.0) / hold)
}

/// One replanning call: assess, weight, resample, cluster, select.
#[allow(clippy::too_many_arguments)]
pub fn plan_step<R: Rng + ?Sized, F: FreeSpace + Sync>(
    ego: EgoState,
    ego_lane: &Lane,
    other_lanes: &[Lane],
    free_space: &F,
    prev: Option<&ParticleSet>,
    risk: &RiskConfig,
    cfg: &PlannerConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<PlanStep, PlannerError> {
    cfg.validate()?;
    let mut set = assess(
        prev,
        ego,
        ego_lane,
        other_lanes,
        free_space,
        risk,
        rng,
        exec,
    )?;

    let model = EgoModel::new(ego_lane);
    let u_d = |x: EgoState| desired_control(x, cfg, risk.a_min, risk.a_max).a;
    exec.try_for_each_mut(&mut set.particles, |_, p| {
        p.w_d = desired_weight(p, &model, u_d, cfg.sigma_u, risk.dt)?;
        Ok::<(), RiskError>(())
    })?;
    let w_s: Vec<f64> = set.particles.iter().map(|p| p.w_s).collect();
    let w_d: Vec<f64> = set.particles.iter().map(|p| p.w_d).collect();
    let w = combine_weights(&w_s, &w_d, cfg.epsilon)?;
    for (p, wi) in set.particles.iter_mut().zip(&w) {
        p.w = *wi;
    }
    let min_w_s = set.min_w_s();

    let (particles, clusters, command, fallback) = match resample(&set, &w, rng) {
        Ok(resampled) => {
            let actions: Vec<f64> = resampled
                .particles
                .iter()
                .map(|p| held_acceleration(p.theta_e.a, ego.v, risk.replan_period))
                .collect();
            match cluster_actions(&actions, cfg.dbscan_eps, cfg.min_pts(actions.len())) {
                Ok(clusters) => {
                    let command = cfg
                        .cluster_choice
                        .select(&clusters)
                        .ok_or(PlannerError::NoClusters)?;
                    (resampled, clusters, command, None)
                }
                Err(PlannerError::NoClusters) => {
                    let total: f64 = w.iter().sum();
                    let mean = set
                        .particles
                        .iter()
                        .zip(&w)
                        .map(|(p, wi)| {
                            held_acceleration(p.theta_e.a, ego.v, risk.replan_period) * wi
                        })
                        .sum::<f64>()
                        / total;
                    (
                        resampled,
                        Vec::new(),
                        EgoControl { a: mean },
                        Some(Fallback::WeightedMean),
                    )
                }
                Err(e) => return Err(e),
            }
        }
        Err(PlannerError::DegenerateWeights) => {
            // keep the hypotheses unweighted so the search continues
            let mut carried = set.clone();
            for (i, p) in carried.particles.iter_mut().enumerate() {
                *p = p.hypothesis();
                p.parent = Some(i);
            }
            carried.stage = crate::risk::Stage::Sampled;
            let command = EgoControl { a: risk.a_min };
            (carried, Vec::new(), command, Some(Fallback::MaxBraking))
        }
        Err(e) => return Err(e),
    };

    Ok(PlanStep {
        command: EgoControl {
            a: risk.clamp_accel(command.a),
        },
        particles,
        assessed: set,
        clusters,
        min_w_s,
        fallback,
    })
}

/// Stateful planner: owns its random stream and the particle set carried
/// between calls. One instance serves one vehicle.
#[derive(Debug, Clone)]
pub struct Planner {
    pub risk: RiskConfig,
    pub config: PlannerConfig,
    pub exec: Execution,
    rng: ChaCha8Rng,
    prev: Option<ParticleSet>,
}

impl Planner {
    pub fn new(
        risk: RiskConfig,
        config: PlannerConfig,
        seed: u64,
        exec: Execution,
    ) -> Result<Self, PlannerError> {
        risk.validate()?;
        config.validate()?;
        Ok(Self {
            risk,
            config,
            exec,
            rng: ChaCha8Rng::seed_from_u64(seed),
            prev: None,
        })
    }

    pub fn step<F: FreeSpace + Sync>(
        &mut self,
        ego: EgoState,
        ego_lane: &Lane,
        other_lanes: &[Lane],
        free_space: &F,
    ) -> Result<PlanStep, PlannerError> {
        let out = plan_step(
            ego,
            ego_lane,
            other_lanes,
            free_space,
            self.prev.as_ref(),
            &self.risk,
            &self.config,
            &mut self.rng,
            self.exec,
        )?;
        self.prev = Some(out.particles.clone());
        Ok(out)
    }

    pub fn previous(&self) -> Option<&ParticleSet> {
        self.prev.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{visibility_polygon, ObservablePolygon, Vec2};
    use proptest::prelude::*;

    fn bounds() -> (f64, f64) {
        (-6.0, 3.0)
    }

    fn cluster(a: f64, n: usize, first: usize) -> ActionCluster {
        ActionCluster {
            member_indices: (first..first + n).collect(),
            centroid_a: a,
        }
    }

    #[test]
    fn held_acceleration_examples() {
        assert_eq!(held_acceleration(-6.0, 0.0, 0.2), 0.0);
        assert_eq!(held_acceleration(2.0, 0.0, 0.2), 2.0);
        assert_eq!(held_acceleration(-6.0, 1.5, 0.5), -3.0);
        assert_eq!(held_acceleration(-2.0, 1.5, 0.5), -2.0);
        assert_eq!(held_acceleration(-6.0, 9.0, 0.2), -6.0);
        // the speed at the end of the hold is the same
        let end = |a: f64| (1.5 + a * 0.5).max(0.0);
        assert_eq!(end(-6.0), end(held_acceleration(-6.0, 1.5, 0.5)));
    }

    #[test]
    fn desired_control_examples() {
        let (lo, hi) = bounds();
        let cfg = PlannerConfig::default();
        assert_eq!(
            desired_control(EgoState::new(0.0, 9.0), &cfg, lo, hi).a,
            0.0
        );
        assert_eq!(
            desired_control(EgoState::new(0.0, 5.0), &cfg, lo, hi).a,
            3.0
        );
        let stop = PlannerConfig {
            stopline_s: Some(16.0),
            ..cfg.clone()
        };
        assert_eq!(
            desired_control(EgoState::new(0.0, 8.0), &stop, lo, hi).a,
            -2.0
        );
        // far from the stopline the speed controller still runs
        assert_eq!(
            desired_control(EgoState::new(-200.0, 8.0), &stop, lo, hi).a,
            1.0
        );
        // past the stopline
        assert_eq!(
            desired_control(EgoState::new(20.0, 8.0), &stop, lo, hi).a,
            1.0
        );
        // demand beyond the braking limit saturates
        assert_eq!(
            desired_control(EgoState::new(15.9, 8.0), &stop, lo, hi).a,
            -6.0
        );
    }

    #[test]
    fn select_action_examples() {
        assert_eq!(
            select_action(&[cluster(1.5, 10, 0), cluster(-2.0, 10, 10)])
                .unwrap()
                .a,
            -2.0
        );
        assert_eq!(select_action(&[cluster(0.7, 10, 0)]).unwrap().a, 0.7);
        let tie = [cluster(-1.0, 10, 0), cluster(-1.0, 50, 10)];
        let chosen = ClusterChoice::MostDeceleration.select(&tie).unwrap();
        assert_eq!(chosen.a, -1.0);
        assert!(select_action(&[]).is_none());
        let aggressive =
            ClusterChoice::MostAcceleration.select(&[cluster(1.5, 10, 0), cluster(-2.0, 10, 10)]);
        assert_eq!(aggressive.unwrap().a, 1.5);
    }

    #[test]
    fn ties_prefer_larger_then_earlier() {
        let key = |c: &[ActionCluster]| {
            // identify the winner by its first member
            let a = select_action(c).unwrap().a;
            let mut best: Option<&ActionCluster> = None;
            for x in c {
                if x.centroid_a == a && best.is_none_or(|b| x.len() > b.len()) {
                    best = Some(x);
                }
            }
            best.unwrap().member_indices[0]
        };
        assert_eq!(key(&[cluster(-1.0, 10, 0), cluster(-1.0, 50, 10)]), 10);
        assert_eq!(key(&[cluster(-1.0, 50, 0), cluster(-1.0, 50, 60)]), 0);
    }

    #[test]
    fn config_validation() {
        PlannerConfig::default().validate().unwrap();
        let base = PlannerConfig::default();
        for c in [
            PlannerConfig {
                sigma_u: 0.0,
                ..base.clone()
            },
            PlannerConfig {
                epsilon: 1.0,
                ..base.clone()
            },
            PlannerConfig {
                target_speed: 0.0,
                ..base.clone()
            },
            PlannerConfig {
                dbscan_eps: 0.0,
                ..base.clone()
            },
            PlannerConfig {
                dbscan_min_pts: Some(0),
                ..base.clone()
            },
        ] {
            assert!(c.validate().is_err());
        }
        assert_eq!(base.min_pts(1000), 10);
        assert_eq!(base.min_pts(200), 5);
    }

    fn ego_lane() -> Lane {
        Lane::straight("ego", Vec2::new(0.0, -60.0), Vec2::new(0.0, 60.0), 3.5).unwrap()
    }

    fn cross_lane() -> Lane {
        Lane::straight("cross", Vec2::new(-60.0, 0.0), Vec2::new(60.0, 0.0), 3.5).unwrap()
    }

    #[test]
    fn open_road_follows_desired_control() {
        let lane = ego_lane();
        let poly = visibility_polygon(Vec2::new(0.0, -30.0), &[], 60.0, 720).unwrap();
        let risk = RiskConfig::default();
        let cfg = PlannerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ego = EgoState::new(30.0, 9.0);
        let step = plan_step(
            ego,
            &lane,
            &[],
            &poly,
            None,
            &risk,
            &cfg,
            &mut rng,
            Execution::Parallel,
        )
        .unwrap();
        let want = desired_control(ego, &cfg, risk.a_min, risk.a_max).a;
        assert!(step.fallback.is_none());
        assert_eq!(step.min_w_s, 1.0);
        assert!(
            (step.command.a - want).abs() <= cfg.dbscan_eps,
            "{}",
            step.command.a
        );
    }

    #[test]
    fn blind_intersection_brakes() {
        let lane = ego_lane();
        let radii = vec![1e-3; 720];
        let poly = ObservablePolygon::from_radii(Vec2::new(0.0, -15.0), radii).unwrap();
        let risk = RiskConfig::default();
        let cfg = PlannerConfig::default();
        let mut planner = Planner::new(risk, cfg, 9, Execution::Parallel).unwrap();
        let ego = EgoState::new(45.0, 9.0);
        for _ in 0..3 {
            let step = planner.step(ego, &lane, &[cross_lane()], &poly).unwrap();
            assert!(step.command.a <= 0.0, "{:?}", step.command);
        }
    }

    #[test]
    fn same_seed_same_command() {
        let lane = ego_lane();
        let occluder = vec![
            Vec2::new(-30.0, -20.0),
            Vec2::new(-5.0, -20.0),
            Vec2::new(-5.0, -5.0),
            Vec2::new(-30.0, -5.0),
        ];
        let poly = visibility_polygon(Vec2::new(0.0, -20.0), &[occluder], 60.0, 720).unwrap();
        let run = |exec| {
            let mut p =
                Planner::new(RiskConfig::default(), PlannerConfig::default(), 77, exec).unwrap();
            (0..3)
                .map(|k| {
                    p.step(
                        EgoState::new(40.0 + k as f64, 8.0),
                        &lane,
                        &[cross_lane()],
                        &poly,
                    )
                    .unwrap()
                    .command
                    .a
                })
                .collect::<Vec<_>>()
        };
        let a = run(Execution::Parallel);
        assert_eq!(a, run(Execution::Parallel));
        assert_eq!(a, run(Execution::Sequential));
    }

    proptest! {
        #[test]
        fn selection_stays_in_bounds(
            a in prop::collection::vec(-6.0f64..=3.0, 1..300),
            eps in 0.05f64..1.0,
            min_pts in 1usize..10,
        ) {
            if let Ok(c) = cluster_actions(&a, eps, min_pts) {
                for choice in [ClusterChoice::MostDeceleration, ClusterChoice::MostAcceleration] {
                    let u = choice.select(&c).unwrap().a;
                    prop_assert!((-6.0..=3.0).contains(&u));
                }
                for cl in &c {
                    prop_assert!(!cl.is_empty());
                }
            }
        }
    }
}
