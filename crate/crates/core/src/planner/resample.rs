use rand::Rng;

use super::PlannerError;
use crate::risk::{ParticleSet, Stage};

/// Indices picked by systematic resampling: `n` pointers at stride `1/n`
/// from a single offset `u ∈ [0, 1/n)` walk the cumulative weights.
pub fn systematic_indices<R: Rng + ?Sized>(
    w: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>, PlannerError> {
    if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(PlannerError::DegenerateWeights);
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(PlannerError::DegenerateWeights);
    }
    let u0: f64 = rng.random::<f64>() / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    let mut cum = w[0] / total;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        // the last positive weight catches pointers lost to rounding
        while u >= cum && j + 1 < w.len() {
            j += 1;
            cum += w[j] / total;
        }
        while w[j] == 0.0 {
            j -= 1;
        }
        out.push(j);
    }
    Ok(out)
}

/// Draws `N` particles proportionally to `w`. The result holds bare
/// hypotheses with unit weights and `parent` pointing into `set`.
pub fn resample<R: Rng + ?Sized>(
    set: &ParticleSet,
    w: &[f64],
    rng: &mut R,
) -> Result<ParticleSet, PlannerError> {
    if w.len() != set.len() {
        return Err(PlannerError::LengthMismatch {
            w_s: set.len(),
            w_d: w.len(),
        });
    }
    let idx = systematic_indices(w, set.len(), rng)?;
    let particles = idx
        .into_iter()
        .map(|j| {
            let mut p = set.particles[j].hypothesis();
            p.parent = Some(j);
            p
        })
        .collect();
    Ok(ParticleSet {
        particles,
        iteration: set.iteration,
        seed: set.seed,
        stage: Stage::Sampled,
    })
}
