use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::advtrain::InnerObjective;
use crate::attacks::{Mode, PgdConfig, Solver};
use crate::dataset::{CsvSchema, ImputationMode};

/// Run configuration read from a TOML file. Every key is optional; command
/// line flags take precedence over anything set here.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub prepare: PrepareSection,
    pub train: TrainSection,
    pub advtrain: AdvTrainSection,
    pub attack: AttackSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrepareSection {
    pub csv: Option<PathBuf>,
    pub synthetic: Option<usize>,
    pub schema: Option<CsvSchema>,
    pub ratio: Option<f64>,
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Desk,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub preset: Option<Preset>,
    pub dims: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr0: Option<f64>,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvTrainSection {
    pub budget: Option<usize>,
    pub imputation: Option<ImputationMode>,
    pub weight_max: Option<f64>,
    pub weight_min: Option<f64>,
    pub inner_solver: Option<Solver>,
    pub inner_objective: Option<InnerObjective>,
    pub model: Option<PathBuf>,
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub kind: Option<String>,
    pub mode: Option<Mode>,
    pub imputation: Option<ImputationMode>,
    pub beta: Option<Vec<usize>>,
    pub eps: Option<Vec<f64>>,
    pub solver: Option<Solver>,
    pub samples: Option<usize>,
    pub oracle_check: Option<bool>,
    pub pgd: Option<PgdConfig>,
    pub results: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    pub results: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Display name to model file, for the MAPE table.
    pub models: Option<BTreeMap<String, PathBuf>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}
