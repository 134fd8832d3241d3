//! Load-forecasting data: CSV ingestion, temporal encoding, outlier removal,
//! train/test split, min-max scaling and the operator's imputation vectors.
//!
//! Every sample has 12 features. The six weather channels (pressure, cloud
//! cover, humidity, temperature, wind direction, wind speed) come first and
//! are the *flexible* block an adversary can block; the six sine/cosine
//! calendar encodings follow and are *fixed* because the operator can verify
//! them independently.

mod csv_io;
mod prepared;
mod synth;

use std::f64::consts::PI;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, CsvSchema, TimeColumns};
pub use prepared::{prepare, Manifest, PrepareConfig, Prepared, MANIFEST_VERSION};
pub use synth::{synth_generate, synth_records, synth_target, SynthConfig};

pub const N_FEATURES: usize = 12;
pub const N_FLEX: usize = 6;
pub const FLEX_IDX: Range<usize> = 0..N_FLEX;
pub const FIX_IDX: Range<usize> = N_FLEX..N_FEATURES;

pub type Features = [f64; N_FEATURES];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed CSV: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unparseable field at row {row}, column `{column}`: {value:?}")]
    UnparseableField { row: usize, column: String, value: String },
    #[error("invalid timestamp at row {row}: {reason}")]
    InvalidTimestamp { row: usize, reason: String },
    #[error("non-positive load at row {row}: {value}")]
    NonPositiveLoad { row: usize, value: f64 },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("outlier removal left no rows")]
    AllRemoved,
    #[error("flexible column {0} is constant on the training set")]
    DegenerateColumn(usize),
    #[error("split ratio {0} is outside (0, 1)")]
    BadRatio(f64),
    #[error("split would leave an empty partition ({train} train / {test} test)")]
    EmptyPartition { train: usize, test: usize },
    #[error("dataset file is corrupt: {0}")]
    Corrupt(String),
}

/// Calendar position of an hourly record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamp {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

impl Timestamp {
    pub fn is_valid(&self) -> bool {
        (1..=12).contains(&self.month) && (1..=31).contains(&self.day) && self.hour <= 23
    }
}

/// One row of the raw hourly table, before encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: Timestamp,
    /// Weather channels in flexible-feature order: pressure (kPa), cloud
    /// cover (%), humidity (%), temperature (C), wind direction (deg), wind
    /// speed (km/h).
    pub weather: [f64; N_FLEX],
    pub load: f64,
}

/// Sine/cosine encoding of month (period 12), day of month (period 31) and
/// hour (period 24).
pub fn encode_temporal(ts: &Timestamp) -> [f64; 6] {
    let month = 2.0 * PI * ts.month as f64 / 12.0;
    let day = 2.0 * PI * ts.day as f64 / 31.0;
    let hour = 2.0 * PI * ts.hour as f64 / 24.0;
    [month.sin(), month.cos(), day.sin(), day.cos(), hour.sin(), hour.cos()]
}

fn load_mean_std(records: &[RawRecord]) -> (f64, f64) {
    let n = records.len() as f64;
    let mean = records.iter().map(|r| r.load).sum::<f64>() / n;
    if records.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = records.iter().map(|r| (r.load - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Drops every record whose load lies more than three sample standard
/// deviations from the mean load of the whole input. Order is preserved.
pub fn remove_outliers(records: &[RawRecord]) -> Result<Vec<RawRecord>, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    let (mean, std) = load_mean_std(records);
    let kept: Vec<RawRecord> = records
        .iter()
        .filter(|r| (r.load - mean).abs() <= 3.0 * std)
        .cloned()
        .collect();
    if kept.is_empty() {
        return Err(DatasetError::AllRemoved);
    }
    Ok(kept)
}

/// Per-column min/max of the flexible block, fitted on the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: [f64; N_FLEX],
    pub max: [f64; N_FLEX],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<Features>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn from_records(records: &[RawRecord]) -> Self {
        let mut x = Vec::with_capacity(records.len());
        let mut y = Vec::with_capacity(records.len());
        for r in records {
            let mut row = [0.0; N_FEATURES];
            row[FLEX_IDX].copy_from_slice(&r.weather);
            row[FIX_IDX].copy_from_slice(&encode_temporal(&r.timestamp));
            x.push(row);
            y.push(r.load);
        }
        Dataset { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: idx.iter().map(|&i| self.x[i]).collect(),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = (&Features, f64)> + '_ {
        self.x.iter().zip(self.y.iter().copied())
    }
}

/// Index partition used by [`split`]: `train` then `test`, each in ascending
/// original order.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::BadRatio(ratio));
    }
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(DatasetError::EmptyPartition {
            train: n_train,
            test: n - n_train,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), DatasetError> {
    let (train, test) = split_indices(dataset.len(), ratio, seed)?;
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

pub fn fit_scale(train: &Dataset) -> Result<Scaling, DatasetError> {
    let mut min = [f64::INFINITY; N_FLEX];
    let mut max = [f64::NEG_INFINITY; N_FLEX];
    for row in &train.x {
        for j in FLEX_IDX {
            min[j] = min[j].min(row[j]);
            max[j] = max[j].max(row[j]);
        }
    }
    for j in FLEX_IDX {
        if !(max[j] > min[j]) {
            return Err(DatasetError::DegenerateColumn(j));
        }
    }
    Ok(Scaling { min, max })
}

/// Maps flexible column j through (v - min_j) / (max_j - min_j). Values
/// outside the fitted range land outside [0, 1] and are kept as they are.
pub fn apply_scale(dataset: &Dataset, scaling: &Scaling) -> Dataset {
    let x = dataset
        .x
        .iter()
        .map(|row| {
            let mut out = *row;
            for j in FLEX_IDX {
                out[j] = (row[j] - scaling.min[j]) / (scaling.max[j] - scaling.min[j]);
            }
            out
        })
        .collect();
    Dataset {
        x,
        y: dataset.y.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputationMode {
    Zero,
    Mean,
}

impl ImputationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ImputationMode::Zero => "zero",
            ImputationMode::Mean => "mean",
        }
    }
}

impl std::str::FromStr for ImputationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" | "0" => Ok(ImputationMode::Zero),
            "mean" => Ok(ImputationMode::Mean),
            other => Err(format!("unknown imputation `{other}` (expected zero|mean)")),
        }
    }
}

/// Values the operator substitutes for blocked flexible features. The fixed
/// block is never imputed and is stored as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationVector {
    pub mode: ImputationMode,
    pub values: Features,
}

impl ImputationVector {
    /// Input seen by the model when the features with `mask[j] == false` are
    /// blocked and replaced by this vector.
    pub fn impute(&self, x: &Features, mask: &[bool; N_FLEX]) -> Features {
        let mut z = *x;
        for j in FLEX_IDX {
            if !mask[j] {
                z[j] = self.values[j];
            }
        }
        z
    }
}

pub fn make_imputation(train: &Dataset, mode: ImputationMode) -> ImputationVector {
    let mut values = [0.0; N_FEATURES];
    if mode == ImputationMode::Mean && !train.is_empty() {
        for row in &train.x {
            for j in FLEX_IDX {
                values[j] += row[j];
            }
        }
        for v in &mut values[FLEX_IDX] {
            *v /= train.len() as f64;
        }
    }
    ImputationVector { mode, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rec(load: f64) -> RawRecord {
        RawRecord {
            timestamp: Timestamp {
                year: 2020,
                month: 1,
                day: 1,
                hour: 0,
            },
            weather: [0.0; N_FLEX],
            load,
        }
    }

    #[test]
    fn temporal_full_period() {
        let t = encode_temporal(&Timestamp {
            year: 2020,
            month: 12,
            day: 31,
            hour: 0,
        });
        for (got, want) in t.iter().zip([0.0, 1.0, 0.0, 1.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "{t:?}");
        }
    }

    #[test]
    fn temporal_quarter_periods() {
        let t = encode_temporal(&Timestamp {
            year: 2020,
            month: 3,
            day: 5,
            hour: 6,
        });
        assert!((t[4] - 1.0).abs() < 1e-12);
        assert!(t[5].abs() < 1e-12);
        assert!((t[0] - 1.0).abs() < 1e-12);
        assert!(t[1].abs() < 1e-12);
    }

    #[test]
    fn outliers_constant_loads_untouched() {
        let r: Vec<_> = [10.0; 4].iter().map(|&l| rec(l)).collect();
        assert_eq!(remove_outliers(&r).unwrap(), r);
    }

    #[test]
    fn outliers_single_spike_removed() {
        let mut loads = vec![100.0; 999];
        loads.push(10_000.0);
        // Independent two-pass oracle: mean 109.9, sample std ~313.06, so the
        // spike sits ~31.6 sigma out and every 100 sits ~0.03 sigma out.
        let n = loads.len() as f64;
        let mean = loads.iter().sum::<f64>() / n;
        let sd = (loads.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - 109.9).abs() < 1e-9);
        assert!((sd - 313.065).abs() < 1e-3);
        let records: Vec<_> = loads.iter().map(|&l| rec(l)).collect();
        let kept = remove_outliers(&records).unwrap();
        assert_eq!(kept.len(), 999);
        assert!(kept.iter().all(|r| r.load == 100.0));
    }

    #[test]
    fn outliers_on_clean_synthetic() {
        let records = synth_records(&SynthConfig::new(500, 4));
        let once = remove_outliers(&records).unwrap();
        let twice = remove_outliers(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn outliers_empty_input() {
        assert!(matches!(remove_outliers(&[]), Err(DatasetError::EmptyFile)));
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let ds = synth_generate(10, 7);
        let (tr, te) = split_indices(ds.len(), 0.8, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.iter().all(|i| !te.contains(i)));
        assert_eq!(split_indices(10, 0.8, 7).unwrap(), (tr, te));
        let (a, b) = split(&ds, 0.8, 7).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
    }

    #[test]
    fn split_seed_changes_partition() {
        let a = split_indices(1000, 0.8, 1).unwrap();
        let b = split_indices(1000, 0.8, 2).unwrap();
        assert_ne!(a.0, b.0);
    }

    #[test]
    fn split_rejects_bad_ratio() {
        assert!(matches!(split_indices(10, 1.0, 0), Err(DatasetError::BadRatio(_))));
        assert!(matches!(split_indices(10, 0.0, 0), Err(DatasetError::BadRatio(_))));
    }

    fn column_dataset(col: &[f64]) -> Dataset {
        let x = col
            .iter()
            .map(|&v| {
                let mut r = [1.0; N_FEATURES];
                for j in FLEX_IDX {
                    r[j] = v + j as f64;
                }
                r[7] = 0.25;
                r
            })
            .collect();
        Dataset {
            x,
            y: vec![1.0; col.len()],
        }
    }

    #[test]
    fn scale_maps_to_unit_interval() {
        let ds = column_dataset(&[2.0, 4.0, 6.0]);
        let s = fit_scale(&ds).unwrap();
        let scaled = apply_scale(&ds, &s);
        let col: Vec<f64> = scaled.x.iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
        assert!(scaled.x.iter().all(|r| r[7] == 0.25));

        let test = column_dataset(&[8.0]);
        assert!(apply_scale(&test, &s).x[0][0] > 1.0);
    }

    #[test]
    fn scale_rejects_constant_column() {
        let ds = column_dataset(&[3.0, 3.0]);
        assert!(matches!(fit_scale(&ds), Err(DatasetError::DegenerateColumn(0))));
    }

    #[test]
    fn imputation_modes() {
        let ds = column_dataset(&[0.0, 1.0]);
        let z = make_imputation(&ds, ImputationMode::Zero);
        assert!(z.values.iter().all(|&v| v == 0.0));
        let single = column_dataset(&[0.3]);
        let m = make_imputation(&single, ImputationMode::Mean);
        assert_eq!(&m.values[FLEX_IDX], &single.x[0][FLEX_IDX]);
        assert!(m.values[FIX_IDX].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn imputation_mean_of_uniform_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Features> = (0..5000)
            .map(|_| {
                let mut r = [0.0; N_FEATURES];
                for v in r.iter_mut().take(N_FLEX) {
                    *v = rng.random::<f64>();
                }
                r
            })
            .collect();
        let ds = Dataset {
            y: vec![1.0; x.len()],
            x,
        };
        let c = make_imputation(&ds, ImputationMode::Mean);
        for j in FLEX_IDX {
            assert!((c.values[j] - 0.5).abs() < 0.02, "{:?}", c.values);
        }
    }

    #[test]
    fn impute_replaces_only_blocked() {
        let c = ImputationVector {
            mode: ImputationMode::Mean,
            values: [9.0; N_FEATURES],
        };
        let x = [1.0; N_FEATURES];
        let z = c.impute(&x, &[true, false, true, true, true, false]);
        assert_eq!(z[1], 9.0);
        assert_eq!(z[5], 9.0);
        assert_eq!(z.iter().filter(|&&v| v == 9.0).count(), 2);
    }

    proptest! {
        #[test]
        fn temporal_on_unit_circle(month in 1u32..=12, day in 1u32..=31, hour in 0u32..24) {
            let t = encode_temporal(&Timestamp { year: 2000, month, day, hour });
            for pair in t.chunks(2) {
                prop_assert!(pair.iter().all(|v| (-1.0..=1.0).contains(v)));
                prop_assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn split_is_partition(n in 2usize..400, seed in any::<u64>(), ratio in 0.05f64..0.95) {
            if let Ok((tr, te)) = split_indices(n, ratio, seed) {
                let mut all: Vec<usize> = tr.iter().chain(&te).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(tr.len(), (ratio * n as f64).round() as usize);
            }
        }

        #[test]
        fn scaled_train_in_unit_box(seed in 0u64..50) {
            let ds = synth_generate(50, seed);
            let s = fit_scale(&ds).unwrap();
            let scaled = apply_scale(&ds, &s);
            for row in &scaled.x {
                for j in FLEX_IDX {
                    prop_assert!((0.0..=1.0).contains(&row[j]));
                }
            }
        }

        #[test]
        fn outlier_pass_that_removes_nothing_is_stable(loads in prop::collection::vec(1.0f64..100.0, 2..60)) {
            let r: Vec<_> = loads.iter().map(|&l| rec(l)).collect();
            let first = remove_outliers(&r).unwrap();
            if first.len() == r.len() {
                prop_assert_eq!(remove_outliers(&first).unwrap(), first);
            }
        }
    }
}
