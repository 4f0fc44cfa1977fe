//! Run configuration read from a TOML file. Every key is optional; missing
//! keys take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureSet;
use crate::error::{Error, Result};
use crate::model::{TcnConfig, GRID_DILATIONS, GRID_FILTERS, GRID_KERNELS};
use crate::sim::SimSettings;
use crate::train::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulation: SimulationSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub training: TrainConfig,
    pub grid: GridSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub participants: usize,
    pub seed: u64,
    pub kinetics: SimSettings,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self { participants: 20, seed: 42, kinetics: SimSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Comma-separated model inputs from wr, hr, hrr, bf, ve.
    pub features: String,
    pub split_seed: u64,
    /// Keep every n-th training window (1 = all).
    pub train_stride: usize,
    /// Keep every n-th validation window (1 = all).
    pub val_stride: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { features: FeatureSet::default().to_list(), split_seed: 7, train_stride: 1, val_stride: 1 }
    }
}

impl DataSection {
    pub fn feature_set(&self) -> Result<FeatureSet> {
        FeatureSet::parse_list(&self.features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub filters: usize,
    pub kernel: usize,
    pub dilations: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { filters: 24, kernel: 8, dilations: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub dilations: Vec<usize>,
    pub jobs: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            filters: GRID_FILTERS.to_vec(),
            kernels: GRID_KERNELS.to_vec(),
            dilations: GRID_DILATIONS.to_vec(),
            jobs: 1,
        }
    }
}

impl GridSection {
    /// Cartesian product in (filters, kernel, dilations) order.
    pub fn configs(&self, input_features: usize, dropout: f64) -> Result<Vec<TcnConfig>> {
        if self.filters.is_empty() || self.kernels.is_empty() || self.dilations.is_empty() {
            return Err(Error::Config("grid lists must not be empty".into()));
        }
        let mut out = Vec::new();
        for &f in &self.filters {
            for &k in &self.kernels {
                for &n in &self.dilations {
                    let c = TcnConfig::new(f, k, n).with_input_features(input_features).with_dropout(dropout);
                    c.validate()?;
                    out.push(c);
                }
            }
        }
        Ok(out)
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run configuration is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.simulation.participants == 0 {
            return Err(Error::Config("simulation.participants must be at least 1".into()));
        }
        self.simulation.kinetics.validate()?;
        self.data.feature_set()?;
        if self.data.train_stride == 0 || self.data.val_stride == 0 {
            return Err(Error::Config("window strides must be positive".into()));
        }
        self.tcn_config()?;
        self.training.validate()?;
        if self.grid.jobs == 0 {
            return Err(Error::Config("grid.jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn tcn_config(&self) -> Result<TcnConfig> {
        let c = TcnConfig::new(self.model.filters, self.model.kernel, self.model.dilations)
            .with_input_features(self.data.feature_set()?.len())
            .with_dropout(self.training.dropout);
        c.validate()?;
        Ok(c)
    }
}
