use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{randomize_scenario, run_episode, EpisodeSummary, Map, Outcome, Settings, SimError};
use crate::exec::map_range_with_jobs;
use crate::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRate {
    pub map: String,
    pub episodes: usize,
    pub collisions: usize,
    pub timeouts: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEpisode {
    pub map: usize,
    pub index: usize,
    #[serde(flatten)]
    pub summary: EpisodeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub per_map: Vec<MapRate>,
    pub median_rate: f64,
    pub master_seed: u64,
    pub timeout_rate: f64,
    /// Over episodes that reached the goal; `None` if none did.
    pub mean_time_to_goal: Option<f64>,
    pub mean_terminal_speed: Option<f64>,
    pub episodes: Vec<BatchEpisode>,
}

/// Seed of one episode, independent of scheduling.
pub fn episode_seed(master_seed: u64, map: usize, episode: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((map as u64) << 32) | episode as u64);
    rng.random()
}

/// Median; the mean of the two middle values for an even count.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs `episodes_per_map` random scenarios with up to `max_agents` agents
/// on every map. Episodes run on `jobs` threads, each one sequentially, so
/// the report only depends on `master_seed`.
pub fn run_batch(
    maps: &[Map],
    episodes_per_map: usize,
    max_agents: usize,
    settings: &Settings,
    master_seed: u64,
    jobs: usize,
) -> Result<BatchReport, SimError> {
    if maps.is_empty() {
        return Err(SimError::InvalidConfig(
            "a batch needs at least one map".into(),
        ));
    }
    if episodes_per_map == 0 {
        return Err(SimError::InvalidConfig(
            "episodes_per_map must be positive".into(),
        ));
    }
    settings.validate()?;
    for m in maps {
        m.validate()?;
    }

    let total = maps.len() * episodes_per_map;
    let results = map_range_with_jobs(jobs, total, |i| {
        let (m, e) = (i / episodes_per_map, i % episodes_per_map);
        let seed = episode_seed(master_seed, m, e);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(0..=max_agents);
        let mut scenario = randomize_scenario(&maps[m], n, &settings.sim, &mut rng)?;
        scenario.seed = rng.random();
        let r = run_episode(&scenario, settings, Execution::Sequential, None)?;
        Ok::<_, SimError>(BatchEpisode {
            map: m,
            index: e,
            summary: r.summary,
        })
    });
    let episodes: Vec<BatchEpisode> = results.into_iter().collect::<Result<_, _>>()?;

    let per_map: Vec<MapRate> = maps
        .iter()
        .enumerate()
        .map(|(m, map)| {
            let eps = episodes.iter().filter(|e| e.map == m);
            let count = |o: Outcome| eps.clone().filter(|e| e.summary.outcome == o).count();
            let collisions = count(Outcome::Collision);
            MapRate {
                map: map.name.clone(),
                episodes: episodes_per_map,
                collisions,
                timeouts: count(Outcome::Timeout),
                rate: collisions as f64 / episodes_per_map as f64,
            }
        })
        .collect();
    let rates: Vec<f64> = per_map.iter().map(|r| r.rate).collect();
    let goals = || {
        episodes
            .iter()
            .filter(|e| e.summary.outcome == Outcome::GoalReached)
    };
    Ok(BatchReport {
        median_rate: median(&rates).unwrap_or(0.0),
        master_seed,
        timeout_rate: per_map.iter().map(|r| r.timeouts).sum::<usize>() as f64 / total as f64,
        mean_time_to_goal: mean(goals().map(|e| e.summary.time)),
        mean_terminal_speed: mean(goals().map(|e| e.summary.terminal_speed)),
        per_map,
        episodes,
    })
}
