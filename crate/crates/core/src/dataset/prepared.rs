//! The end-to-end preparation pipeline and its on-disk artifacts.
//!
//! A prepared directory holds two files:
//! - `manifest.json`: seed, split ratio, row counts, outlier count, scaling
//!   statistics and both imputation vectors, written with shortest
//!   round-trip float formatting so every value is exact;
//! - `dataset.bin`: the scaled train and test splits (bincode).
//!
//! The SHA-256 of the manifest bytes identifies the dataset; model files
//! record it so attacks can refuse a mismatched pairing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    apply_scale, fit_scale, make_imputation, remove_outliers, split, Dataset, DatasetError, ImputationMode,
    ImputationVector, RawRecord, Scaling, N_FLEX,
};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.bin";

#[derive(Debug, Clone, PartialEq)]
pub struct PrepareConfig {
    pub ratio: f64,
    pub seed: u64,
    /// Free-form provenance string stored in the manifest.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub source: String,
    pub seed: u64,
    pub ratio: f64,
    pub n_raw: usize,
    pub outliers_removed: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub scale_min: [f64; N_FLEX],
    pub scale_max: [f64; N_FLEX],
    pub imputation_zero: [f64; N_FLEX],
    pub imputation_mean: [f64; N_FLEX],
    pub dataset_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetFile {
    train: Dataset,
    test: Dataset,
    scaling: Scaling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub scaling: Scaling,
    pub manifest: Manifest,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn flex_part(v: &ImputationVector) -> [f64; N_FLEX] {
    let mut out = [0.0; N_FLEX];
    out.copy_from_slice(&v.values[..N_FLEX]);
    out
}

/// Runs clean -> encode -> split -> scale -> imputation on raw records.
pub fn prepare(records: &[RawRecord], cfg: &PrepareConfig) -> Result<Prepared, DatasetError> {
    let cleaned = remove_outliers(records)?;
    let outliers_removed = records.len() - cleaned.len();
    let encoded = Dataset::from_records(&cleaned);
    let (train_raw, test_raw) = split(&encoded, cfg.ratio, cfg.seed)?;
    let scaling = fit_scale(&train_raw)?;
    let train = apply_scale(&train_raw, &scaling);
    let test = apply_scale(&test_raw, &scaling);
    let file = DatasetFile { train, test, scaling };
    let bytes = bincode::serialize(&file).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        source: cfg.source.clone(),
        seed: cfg.seed,
        ratio: cfg.ratio,
        n_raw: records.len(),
        outliers_removed,
        n_train: file.train.len(),
        n_test: file.test.len(),
        scale_min: file.scaling.min,
        scale_max: file.scaling.max,
        imputation_zero: flex_part(&make_imputation(&file.train, ImputationMode::Zero)),
        imputation_mean: flex_part(&make_imputation(&file.train, ImputationMode::Mean)),
        dataset_sha256: sha256_hex(&bytes),
    };
    Ok(Prepared {
        train: file.train,
        test: file.test,
        scaling: file.scaling,
        manifest,
    })
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl Manifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s.into_bytes()
    }

    /// Identity of the prepared dataset: SHA-256 of the manifest bytes.
    pub fn hash(&self) -> String {
        sha256_hex(&self.to_bytes())
    }

    pub fn read(dir: &Path) -> Result<Manifest, DatasetError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Corrupt(format!("{}: {e}", path.display())))
    }

    pub fn imputation(&self, mode: ImputationMode) -> ImputationVector {
        let flex = match mode {
            ImputationMode::Zero => self.imputation_zero,
            ImputationMode::Mean => self.imputation_mean,
        };
        let mut values = [0.0; super::N_FEATURES];
        values[..N_FLEX].copy_from_slice(&flex);
        ImputationVector { mode, values }
    }
}

impl Prepared {
    pub fn imputation(&self, mode: ImputationMode) -> ImputationVector {
        self.manifest.imputation(mode)
    }

    pub fn write(&self, dir: &Path) -> Result<(), DatasetError> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let file = DatasetFile {
            train: self.train.clone(),
            test: self.test.clone(),
            scaling: self.scaling.clone(),
        };
        let bytes = bincode::serialize(&file).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
        let data_path = dir.join(DATASET_FILE);
        std::fs::write(&data_path, &bytes).map_err(|e| io_err(&data_path, e))?;
        let manifest_path = dir.join(MANIFEST_FILE);
        std::fs::write(&manifest_path, self.manifest.to_bytes()).map_err(|e| io_err(&manifest_path, e))
    }

    pub fn read(dir: &Path) -> Result<Prepared, DatasetError> {
        let manifest = Manifest::read(dir)?;
        let data_path = dir.join(DATASET_FILE);
        let bytes = std::fs::read(&data_path).map_err(|e| io_err(&data_path, e))?;
        if sha256_hex(&bytes) != manifest.dataset_sha256 {
            return Err(DatasetError::Corrupt(format!(
                "{} does not match its manifest hash",
                data_path.display()
            )));
        }
        let file: DatasetFile = bincode::deserialize(&bytes).map_err(|e| DatasetError::Corrupt(e.to_string()))?;
        Ok(Prepared {
            train: file.train,
            test: file.test,
            scaling: file.scaling,
            manifest,
        })
    }
}
