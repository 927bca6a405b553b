//! Run configuration (TOML).
//!
//! ```toml
//! problem = "P1"
//! dim = 1
//! levels = 3
//! budget = 45.0          # default 40 + 5 D
//! repetitions = 50
//! base_seed = 0
//! costs = [1.0, 0.2, 0.1] # optional, default per level count
//!
//! [noise]
//! fractions = [0.025, 0.05, 0.1]
//!
//! [campaign.acquisition]
//! d0 = 5e-3
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use mfal_core::benchmarks::default_costs;
use mfal_core::{CampaignConfig, FidelityLevels, NoiseSettings, Problem};
use serde::{Deserialize, Serialize};

/// Objective served by a child process speaking the line protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// Physical bounds sent to the evaluator; unit cube when absent.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Analytical problem; omitted when `external` is given.
    pub problem: Option<Problem>,
    pub dim: usize,
    pub levels: usize,
    pub budget: Option<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub costs: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: NoiseSettings,
    pub external: Option<ExternalConfig>,
    #[serde(default)]
    pub campaign: CampaignConfig,
    pub output: Option<PathBuf>,
}

fn default_repetitions() -> usize {
    50
}

impl RunConfig {
    /// A benchmark configuration with every default.
    pub fn benchmark(problem: Problem, dim: usize, levels: usize) -> Self {
        Self {
            problem: Some(problem),
            dim,
            levels,
            budget: None,
            repetitions: default_repetitions(),
            base_seed: 0,
            costs: None,
            noise: NoiseSettings::default(),
            external: None,
            campaign: CampaignConfig::default(),
            output: None,
        }
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).context("invalid configuration")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Fills in the budget and costs and checks the whole configuration.
    pub fn resolve(mut self) -> anyhow::Result<Self> {
        if self.budget.is_none() {
            self.budget = Some(40.0 + 5.0 * self.dim as f64);
        }
        if self.costs.is_none() {
            self.costs = Some(default_costs(self.levels)?);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> anyhow::Result<()> {
        match (&self.problem, &self.external) {
            (None, None) => bail!("either `problem` or `external` must be set"),
            (Some(_), Some(_)) => bail!("`problem` and `external` are mutually exclusive"),
            (Some(p), None) => {
                if !p.supported_dims().contains(&self.dim) {
                    bail!("`dim` = {} not supported by {} (supported: {:?})", self.dim, p.name(), p.supported_dims());
                }
                if self.levels < 1 || self.levels > p.max_levels() {
                    bail!("`levels` must be in 1..={} for {}", p.max_levels(), p.name());
                }
            }
            (None, Some(_)) => {
                if self.dim == 0 || self.levels == 0 {
                    bail!("`dim` and `levels` must be positive");
                }
            }
        }
        let budget = self.budget.unwrap_or(0.0);
        if !(budget > 0.0) {
            bail!("`budget` must be positive");
        }
        if self.repetitions == 0 {
            bail!("`repetitions` must be at least 1");
        }
        let costs = self.costs.as_deref().unwrap_or(&[]);
        if costs.len() != self.levels {
            bail!("`costs` has {} entries for {} levels", costs.len(), self.levels);
        }
        self.fidelity_levels().context("`costs`")?;
        self.campaign.validate(self.dim).context("`campaign`")?;
        Ok(())
    }

    pub fn fidelity_levels(&self) -> mfal_core::Result<FidelityLevels> {
        FidelityLevels::from_costs(self.costs.as_deref().unwrap_or(&[]))
    }

    pub fn budget_value(&self) -> f64 {
        self.budget.unwrap_or(40.0 + 5.0 * self.dim as f64)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Short label used in summaries (`P1` or `external`).
    pub fn label(&self) -> String {
        self.problem.map_or_else(|| "external".to_string(), |p| p.name().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve() {
        let c = RunConfig::from_toml("problem = \"P2\"\ndim = 2\nlevels = 3\n").unwrap().resolve().unwrap();
        assert_eq!(c.budget, Some(50.0));
        assert_eq!(c.repetitions, 50);
        assert_eq!(c.costs, Some(vec![1.0, 0.2, 0.1]));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_toml("problem = \"P1\"\ndim = 1\nlevels = 1\nbudgte = 4\n").unwrap_err();
        assert!(format!("{err:#}").contains("budgte"), "{err:#}");
        let err = RunConfig::from_toml("problem = \"P1\"\ndim = 1\nlevels = 1\n[campaign.acquisition]\nd00 = 1\n")
            .unwrap_err();
        assert!(format!("{err:#}").contains("d00"));
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            "problem = \"P1\"\ndim = 2\nlevels = 1\n",
            "problem = \"P1\"\ndim = 1\nlevels = 4\n",
            "problem = \"P1\"\ndim = 1\nlevels = 1\nbudget = 0.0\n",
            "problem = \"P1\"\ndim = 1\nlevels = 2\ncosts = [1.0]\n",
            "problem = \"P1\"\ndim = 1\nlevels = 1\nrepetitions = 0\n",
            "dim = 1\nlevels = 1\n",
        ] {
            assert!(RunConfig::from_toml(text).and_then(RunConfig::resolve).is_err(), "{text}");
        }
    }

    #[test]
    fn effective_config_round_trips() {
        let c = RunConfig::benchmark(Problem::P3, 5, 2).resolve().unwrap();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
