use super::PlannerError;
use crate::dynamics::{integrate_forward, EgoModel, EgoState};
use crate::risk::{Particle, RiskError};

/// `w_d = exp(-δ²/(2σ_u²))`, where `δ²` is the time-averaged squared gap
/// between the particle's acceleration and the desired control `u_d`
/// evaluated along the particle's own predicted ego trajectory.
///
/// The average is a left Riemann sum on the `dt` grid. With `T = 0` the gap
/// at the initial state is used.
pub fn desired_weight<U>(
    particle: &Particle,
    model: &EgoModel<'_>,
    u_d: U,
    sigma_u: f64,
    dt: f64,
) -> Result<f64, RiskError>
where
    U: Fn(EgoState) -> f64,
{
    let a = particle.theta_e.a;
    let delta2 = if particle.horizon <= 0.0 {
        (u_d(particle.ego_init) - a).powi(2)
    } else {
        let tr = integrate_forward(
            model,
            particle.ego_init.into(),
            particle.theta_e,
            particle.horizon,
            dt,
        )?;
        let mut acc = 0.0;
        for k in 0..tr.len() - 1 {
            let gap = u_d(EgoState::from(tr.states[k])) - a;
            acc += gap * gap * (tr.times[k + 1] - tr.times[k]);
        }
        acc / particle.horizon
    };
    Ok((-delta2 / (2.0 * sigma_u * sigma_u)).exp())
}

/// Final particle weights `w_s·(ε·w_d + (1 − ε)(1 − min w_s))`.
pub fn combine_weights(w_s: &[f64], w_d: &[f64], epsilon: f64) -> Result<Vec<f64>, PlannerError> {
    if w_s.len() != w_d.len() {
        return Err(PlannerError::LengthMismatch {
            w_s: w_s.len(),
            w_d: w_d.len(),
        });
    }
    let min_ws = w_s.iter().copied().fold(f64::INFINITY, f64::min);
    let risk = 1.0 - min_ws;
    Ok(w_s
        .iter()
        .zip(w_d)
        .map(|(ws, wd)| ws * (epsilon * wd + (1.0 - epsilon) * risk))
        .collect())
}
