use std::path::Path;

use anyhow::{bail, Context};
use bireach::simulator::{LayoutConfig, Settings};
use serde::{Deserialize, Serialize};

/// Seed used when neither the config file nor `--seed` sets one.
pub const DEFAULT_SEED: u64 = 2024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatchParams {
    pub episodes: usize,
    pub max_agents: usize,
    pub jobs: usize,
}

impl Default for BatchParams {
    fn default() -> Self {
        Self {
            episodes: 1000,
            max_agents: 5,
            jobs: 1,
        }
    }
}

/// Everything the binary can be configured with, as one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub risk: bireach::risk::RiskConfig,
    pub planner: bireach::planner::PlannerConfig,
    pub sim: bireach::simulator::SimConfig,
    pub layout: LayoutConfig,
    pub batch: BatchParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            risk: Default::default(),
            planner: Default::default(),
            sim: Default::default(),
            layout: Default::default(),
            batch: Default::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn settings(&self) -> Settings {
        Settings {
            risk: self.risk.clone(),
            planner: self.planner.clone(),
            sim: self.sim.clone(),
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.settings().validate()?;
        if self.batch.jobs == 0 {
            bail!("batch.jobs must be at least 1");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        toml::to_string(self)
            .context("config does not fit TOML (seeds above 2^63 cannot be written)")
    }
}
