use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Particle, ParticleSet, RiskConfig, RiskError, Stage};
use crate::dynamics::EgoState;
use crate::Execution;

/// Independent stream for item `index` under `seed`.
pub(crate) fn stream_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws `N` particles. Without a previous set every control parameter comes
/// from its uniform prior; with one, each particle perturbs a uniformly
/// chosen parent by a clamped Gaussian, except for a `fresh_fraction` share
/// that is redrawn from the prior.
///
/// Consumes exactly one `u64` from `rng`; per-particle randomness comes from
/// ChaCha streams keyed by particle index, so the result does not depend on
/// the execution mode.
pub fn sample_particles<R: Rng + ?Sized>(
    prev: Option<&ParticleSet>,
    ego_now: EgoState,
    cfg: &RiskConfig,
    rng: &mut R,
    exec: Execution,
) -> Result<ParticleSet, RiskError> {
    cfg.validate()?;
    let seed: u64 = rng.random();
    let kernel_e =
        Normal::new(0.0, cfg.sigma_theta_e).map_err(|e| RiskError::InvalidConfig(e.to_string()))?;
    let kernel_o =
        Normal::new(0.0, cfg.sigma_theta_o).map_err(|e| RiskError::InvalidConfig(e.to_string()))?;
    let parents = prev
        .map(|p| p.particles.as_slice())
        .filter(|p| !p.is_empty());

    let particles = exec.map_range(cfg.n_particles, |i| {
        let mut r = stream_rng(seed, i);
        let horizon = r.random_range(0.0..=cfg.forecast_horizon);
        let [hs, hv] = cfg.ego_init_half_widths;
        let mut ego_init = ego_now;
        if hs > 0.0 {
            ego_init.s += r.random_range(-hs..=hs);
        }
        if hv > 0.0 {
            ego_init.v = (ego_init.v + r.random_range(-hv..=hv)).max(0.0);
        }
        let fresh = r.random::<f64>() < cfg.fresh_fraction;
        match parents {
            Some(parents) if !fresh => {
                let j = r.random_range(0..parents.len());
                let parent = &parents[j];
                let a = cfg.clamp_accel(parent.theta_e.a + kernel_e.sample(&mut r));
                let v = cfg.clamp_speed(parent.theta_o.v + kernel_o.sample(&mut r));
                Particle {
                    parent: Some(j),
                    ..Particle::new(ego_init, a, v, horizon)
                }
            }
            _ => {
                let a = r.random_range(cfg.a_min..=cfg.a_max);
                let v = r.random_range(cfg.v_min..=cfg.v_max);
                Particle::new(ego_init, a, v, horizon)
            }
        }
    });

    Ok(ParticleSet {
        particles,
        iteration: prev.map_or(0, |p| p.iteration + 1),
        seed,
        stage: Stage::Sampled,
    })
}
