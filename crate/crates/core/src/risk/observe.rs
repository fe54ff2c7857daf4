use super::{ParticleSet, RiskError, Stage};
use crate::dynamics::Trajectory;
use crate::geometry::{ObbBox, ObservablePolygon, Vec2};
use crate::Execution;

/// Region of space known to be free of vehicles.
pub trait FreeSpace {
    fn is_free(&self, p: Vec2) -> bool;
}

impl FreeSpace for ObservablePolygon {
    fn is_free(&self, p: Vec2) -> bool {
        self.contains(p)
    }
}

/// Observable polygon minus the predicted occupancy of tracked vehicles.
///
/// A visible vehicle is not free space, and neither is the stretch of lane
/// it will sweep over the forecast horizon. The occupied boxes do not block
/// sight lines; the polygon already accounts for the vehicle bodies.
#[derive(Debug, Clone)]
pub struct TrackedFreeSpace {
    pub polygon: ObservablePolygon,
    pub occupied: Vec<ObbBox>,
}

impl FreeSpace for TrackedFreeSpace {
    fn is_free(&self, p: Vec2) -> bool {
        self.polygon.contains(p) && !self.occupied.iter().any(|b| b.contains(p))
    }
}

/// Time fraction of `trajectory` spent in free space, as a left Riemann sum
/// on the sample grid. A zero-length trajectory scores its single point.
pub fn trajectory_visibility<F: FreeSpace + ?Sized>(trajectory: &Trajectory<1>, free: &F) -> f64 {
    let n = trajectory.len();
    if n == 1 {
        return if free.is_free(trajectory.poses[0].position()) {
            1.0
        } else {
            0.0
        };
    }
    let total = trajectory.horizon() - trajectory.times[0];
    let mut visible = 0.0;
    for k in 0..n - 1 {
        if free.is_free(trajectory.poses[k].position()) {
            visible += trajectory.times[k + 1] - trajectory.times[k];
        }
    }
    (visible / total).clamp(0.0, 1.0)
}

/// Stage 3: `w_s` is the visible time fraction of the intruder trajectory,
/// taking the least visible candidate lane. Particles without any track
/// cannot meet an intruder and get `w_s = 1`.
pub fn observability_weight<F: FreeSpace + Sync + ?Sized>(
    set: &mut ParticleSet,
    free: &F,
    exec: Execution,
) -> Result<(), RiskError> {
    if set.stage < Stage::Backward {
        return Err(RiskError::StageOrder {
            stage: "observability weighting",
            missing: "backward tracks",
        });
    }
    exec.for_each_mut(&mut set.particles, |_, p| {
        p.w_s = p
            .brs
            .iter()
            .flatten()
            .map(|track| trajectory_visibility(&track.trajectory, free))
            .fold(1.0, f64::min);
    });
    set.stage = Stage::Weighted;
    Ok(())
}
