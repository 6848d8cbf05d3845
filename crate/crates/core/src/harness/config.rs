use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::estimators::{Algorithm, CbfemOptions};
use crate::grid::{build_grid, FineFactors, GridParams, GridSpec};
use crate::pilots::GroupingMode;
use crate::scenario::GeneratorConfig;
use crate::{Error, Result};

fn d_sigma_p() -> f64 {
    1.0
}
fn d_root() -> usize {
    1
}
fn d_grouping() -> GroupingMode {
    GroupingMode::TripleBeam
}
fn d_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Mmse, Algorithm::Cbfem]
}
fn d_trials() -> usize {
    10
}
fn d_experiment_id() -> String {
    "experiment".into()
}
fn d_snr() -> Vec<f64> {
    vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotConfig {
    #[serde(default = "d_sigma_p")]
    pub sigma_p: f64,
    #[serde(default = "d_root")]
    pub zc_root: usize,
    #[serde(default = "d_grouping")]
    pub grouping: GroupingMode,
    /// Group count; defaults to the number of available phase shifts
    /// (capped at the terminal count).
    #[serde(default)]
    pub groups: Option<usize>,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig { sigma_p: 1.0, zc_root: 1, grouping: d_grouping(), groups: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "d_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub cbfem: CbfemOptions,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { algorithms: d_algorithms(), cbfem: CbfemOptions::default() }
    }
}

/// Sweep axes; empty axes fall back to the single value in the base config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "d_snr")]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub fine: Vec<FineFactors>,
    #[serde(default)]
    pub speeds_kmh: Vec<f64>,
    #[serde(default)]
    pub groupings: Vec<GroupingMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_experiment_id")]
    pub experiment_id: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "d_trials")]
    pub trials: usize,
    #[serde(default)]
    pub output: Option<String>,
    /// Record estimator wall time (makes output nondeterministic).
    #[serde(default)]
    pub timing: bool,
    pub grid: GridParams,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub pilots: PilotConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

impl ExperimentConfig {
    pub fn new(grid: GridParams) -> Self {
        ExperimentConfig {
            experiment_id: d_experiment_id(),
            seed: None,
            trials: d_trials(),
            output: None,
            timing: false,
            grid,
            generator: GeneratorConfig::default(),
            pilots: PilotConfig::default(),
            estimator: EstimatorConfig::default(),
            sweep: SweepConfig { snr_db: d_snr(), ..Default::default() },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Apply `dotted.key=value` overrides (values parsed as TOML, falling
    /// back to a bare string).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc: toml::Table = toml::from_str(&self.to_toml()?).map_err(|e| Error::Config(e.to_string()))?;
        for ov in overrides {
            let (key, raw) = ov.split_once('=').ok_or_else(|| Error::Config(format!("override {ov:?} is not key=value")))?;
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
            let parts: Vec<&str> = key.trim().split('.').collect();
            let mut table = &mut doc;
            for p in &parts[..parts.len() - 1] {
                table = table
                    .entry(p.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()))
                    .as_table_mut()
                    .ok_or_else(|| Error::Config(format!("{key}: {p} is not a table")))?;
            }
            table.insert(parts[parts.len() - 1].to_owned(), value);
        }
        let text = toml::to_string(&doc).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.snr_db.is_empty() || self.sweep.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR list must be nonempty and finite".into()));
        }
        if self.estimator.algorithms.is_empty() {
            return Err(Error::Config("no estimator algorithms selected".into()));
        }
        self.estimator.cbfem.validate()?;
        for fine in self.fine_axis() {
            let g = self.grid_for(fine)?;
            for speed in self.speed_axis() {
                GeneratorConfig { speed_kmh: speed, ..self.generator.clone() }.validate(&g)?;
            }
        }
        Ok(())
    }

    pub fn fine_axis(&self) -> Vec<FineFactors> {
        if self.sweep.fine.is_empty() {
            vec![self.grid.fine]
        } else {
            self.sweep.fine.clone()
        }
    }
    pub fn speed_axis(&self) -> Vec<f64> {
        if self.sweep.speeds_kmh.is_empty() {
            vec![self.generator.speed_kmh]
        } else {
            self.sweep.speeds_kmh.clone()
        }
    }
    pub fn grouping_axis(&self) -> Vec<GroupingMode> {
        if self.sweep.groupings.is_empty() {
            vec![self.pilots.grouping]
        } else {
            self.sweep.groupings.clone()
        }
    }

    pub fn grid_for(&self, fine: FineFactors) -> Result<GridSpec> {
        build_grid(&GridParams { fine, ..self.grid.clone() })
    }

    /// Effective group count for a grid.
    pub fn group_count(&self, grid: &GridSpec) -> usize {
        self.pilots.groups.unwrap_or(grid.shift_slots()).min(self.generator.num_uts)
    }
}
