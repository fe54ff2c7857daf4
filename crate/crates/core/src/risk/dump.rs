use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{Particle, ParticleSet};

/// One JSON Lines record of the particle dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub iteration: usize,
    /// Simulation time of the planning call, when known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<f64>,
    pub theta_e: f64,
    pub theta_o: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `[x, y, heading]` of the ego endpoint.
    pub frs_pose: Option<[f64; 3]>,
    /// Intruder start arc length per candidate lane.
    pub brs_start_s: Vec<Option<f64>>,
    pub w_s: f64,
    pub w_d: f64,
    pub w: f64,
}

impl ParticleRecord {
    pub fn from_particle(iteration: usize, t: Option<f64>, p: &Particle) -> Self {
        Self {
            iteration,
            t,
            theta_e: p.theta_e.a,
            theta_o: p.theta_o.v,
            horizon: p.horizon,
            frs_pose: p.frs.map(|f| [f.pose.x, f.pose.y, f.pose.heading]),
            brs_start_s: p
                .brs
                .iter()
                .map(|b| b.as_ref().map(|track| track.start_s()))
                .collect(),
            w_s: p.w_s,
            w_d: p.w_d,
            w: p.w,
        }
    }
}

/// Writes one line per particle.
pub fn write_particles_jsonl<W: Write>(
    out: &mut W,
    set: &ParticleSet,
    t: Option<f64>,
) -> io::Result<()> {
    for p in &set.particles {
        let rec = ParticleRecord::from_particle(set.iteration, t, p);
        serde_json::to_writer(&mut *out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
