use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glam::FitConfig;
use crate::simulators::{SimulatorId, DEFAULT_STRIKE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Exact law of the simulator output.
    Analytic,
    /// Empirical law of repeated simulator runs.
    Replications,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// `None` picks analytic where the exact law is known.
    pub mode: Option<ReferenceMode>,
    /// Runs per test point in replication mode.
    pub count: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { mode: None, count: 10_000 }
    }
}

/// Sweep settings, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulator: SimulatorId,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub replications: Vec<usize>,
    pub test_size: usize,
    pub seed: u64,
    pub strike: f64,
    pub reference: ReferenceConfig,
    pub fit: FitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            simulator: SimulatorId::BlackScholes,
            sizes: vec![250, 500, 1000, 2000, 4000],
            repetitions: 50,
            replications: vec![1],
            test_size: 1000,
            seed: 0,
            strike: DEFAULT_STRIKE,
            reference: ReferenceConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_simulator(simulator: SimulatorId) -> Self {
        Self { simulator, ..Self::default() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Reduced protocol: sizes {250, 500, 1000}, 10 repetitions, 200 test
    /// points, 2000-run references.
    pub fn quick(mut self) -> Self {
        self.sizes = vec![250, 500, 1000];
        self.repetitions = 10;
        self.test_size = 200;
        self.reference.count = 2000;
        self
    }

    pub fn reference_mode(&self) -> ReferenceMode {
        self.reference.mode.unwrap_or(match self.simulator {
            SimulatorId::BlackScholes | SimulatorId::Heteroskedastic5d => ReferenceMode::Analytic,
            _ => ReferenceMode::Replications,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        if self.sizes.is_empty() || self.replications.is_empty() {
            return Err(Error::Config("sizes and replications must be non-empty".into()));
        }
        for &n in &self.sizes {
            positive("design size", n)?;
            for &r in &self.replications {
                positive("replication count", r)?;
                if n % r != 0 {
                    return Err(Error::Config(format!("replication count {r} does not divide design size {n}")));
                }
            }
        }
        positive("repetitions", self.repetitions)?;
        positive("test_size", self.test_size)?;
        if self.reference_mode() == ReferenceMode::Replications && self.reference.count < 2 {
            return Err(Error::Config("reference.count must be at least 2".into()));
        }
        if self.reference_mode() == ReferenceMode::Analytic && !matches!(self.simulator, SimulatorId::BlackScholes | SimulatorId::Heteroskedastic5d) {
            return Err(Error::Config(format!("{} has no analytic output law", self.simulator)));
        }
        if !self.strike.is_finite() {
            return Err(Error::Config("strike must be finite".into()));
        }
        self.fit.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("simulator = \"asian-average\"\nsizes = [100]\n[fit]\nn_fgls = 3\n").unwrap();
        assert_eq!(cfg.simulator, SimulatorId::AsianAverage);
        assert_eq!(cfg.sizes, vec![100]);
        assert_eq!(cfg.repetitions, 50);
        assert_eq!(cfg.fit.n_fgls, 3);
        assert_eq!(cfg.reference_mode(), ReferenceMode::Replications);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("simulator = \"nope\"").is_err());
        assert!(ExperimentConfig::from_toml("sizes = [250]\nreplications = [3]").is_err());
        assert!(ExperimentConfig::from_toml("repetitions = 0").is_err());
        assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
        assert!(ExperimentConfig::from_toml("simulator = \"sir-epidemic\"\n[reference]\nmode = \"analytic\"").is_err());
    }

    #[test]
    fn quick_protocol() {
        let q = ExperimentConfig::default().quick();
        assert_eq!((q.sizes.clone(), q.repetitions, q.test_size, q.reference.count), (vec![250, 500, 1000], 10, 200, 2000));
    }
}
