use super::{BrsTrack, FrsEndpoint, ParticleSet, RiskConfig, RiskError, Stage};
use crate::dynamics::{integrate_reverse, propagate, EgoModel, EgoState, OtherModel};
use crate::geometry::Lane;
use crate::Execution;

/// Stage 1: integrates every particle's ego hypothesis forward to its own
/// horizon. Endpoints past the lane end are held at the lane end.
pub fn compute_frs_e(
    set: &mut ParticleSet,
    ego_lane: &Lane,
    cfg: &RiskConfig,
    exec: Execution,
) -> Result<(), RiskError> {
    let model = EgoModel::new(ego_lane);
    let length = ego_lane.length();
    exec.try_for_each_mut(&mut set.particles, |_, p| {
        let end = propagate(&model, p.ego_init.into(), p.theta_e, p.horizon, cfg.dt)?;
        let mut state = EgoState::from(end);
        let clamped = state.s > length;
        if clamped {
            state.s = length;
        }
        p.frs = Some(FrsEndpoint {
            state,
            pose: ego_lane.extrapolated_pose(state.s),
            clamped,
        });
        p.brs.clear();
        Ok::<(), RiskError>(())
    })?;
    set.stage = Stage::Forward;
    Ok(())
}

/// Stage 2: for each particle and candidate lane, projects the ego endpoint
/// onto the lane (within half the lane width plus the lateral margin) and
/// integrates the constant-speed model backwards from that point.
/// Particles whose endpoint projects onto no lane carry no track.
pub fn compute_brs_o(
    set: &mut ParticleSet,
    other_lanes: &[Lane],
    cfg: &RiskConfig,
    exec: Execution,
) -> Result<(), RiskError> {
    if set.stage < Stage::Forward {
        return Err(RiskError::StageOrder {
            stage: "backward reachability",
            missing: "forward endpoints",
        });
    }
    let models: Vec<OtherModel> = other_lanes.iter().map(OtherModel::new).collect();
    exec.try_for_each_mut(&mut set.particles, |_, p| {
        let frs = p.frs.ok_or(RiskError::StageOrder {
            stage: "backward reachability",
            missing: "forward endpoints",
        })?;
        let target = frs.pose.position();
        p.brs.clear();
        for (lane, model) in other_lanes.iter().zip(&models) {
            let threshold = 0.5 * lane.width() + cfg.lateral_margin;
            let track = match lane.project(target, threshold) {
                Some(proj) => {
                    let trajectory =
                        integrate_reverse(model, [proj.s], p.theta_o, p.horizon, cfg.dt)?;
                    Some(BrsTrack {
                        collision_s: proj.s,
                        trajectory,
                    })
                }
                None => None,
            };
            p.brs.push(track);
        }
        Ok::<(), RiskError>(())
    })?;
    set.stage = Stage::Backward;
    Ok(())
}
