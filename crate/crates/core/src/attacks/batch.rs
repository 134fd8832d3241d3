use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{attack_one, AttackError, AttackResult, AttackSpec, Mode, Solver};
use crate::dataset::{ImputationMode, ImputationVector};
use crate::metrics::{box_stats, median_abs};
use crate::network::Plnn;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub index: usize,
    /// Failures are kept as their message so a batch never aborts.
    pub result: Result<AttackResult, String>,
    pub ms: f64,
}

/// One row of the summary table; also the in-memory summary of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub kind: String,
    pub mode: Mode,
    pub eps: Option<f64>,
    pub beta: Option<usize>,
    pub imputation: Option<ImputationMode>,
    pub solver: Solver,
    pub n: usize,
    pub n_failed: usize,
    /// Failed sample indices joined by `;`.
    pub failures: String,
    pub mpe_median: Option<f64>,
    pub mpe_q1: Option<f64>,
    pub mpe_q3: Option<f64>,
    pub mpe_min: Option<f64>,
    pub mpe_max: Option<f64>,
    pub median_abs_mpe: Option<f64>,
    pub mean_ms: f64,
    /// Per-sample table of this cell, relative to the summary file.
    pub results_file: String,
}

impl BatchSummary {
    pub fn failure_indices(&self) -> Vec<usize> {
        self.failures.split(';').filter_map(|s| s.parse().ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub spec: AttackSpec,
    pub outcomes: Vec<SampleOutcome>,
    pub summary: BatchSummary,
    /// Wall time of the whole batch in seconds.
    pub elapsed: f64,
}

impl BatchReport {
    pub fn successes(&self) -> impl Iterator<Item = (usize, &AttackResult)> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|r| (o.index, r)))
    }

    pub fn mpes(&self) -> Vec<f64> {
        self.successes().map(|(_, r)| r.mpe).collect()
    }
}

/// Attacks every sample on a pool of `workers` threads. Results keep the
/// order of `inputs` whatever the scheduling.
pub fn batch_attack<X: AsRef<[f64]> + Sync>(
    model: &Plnn,
    inputs: &[X],
    spec: &AttackSpec,
    c: &ImputationVector,
    solver: Solver,
    workers: usize,
) -> Result<BatchReport, AttackError> {
    spec.validate()?;
    if workers == 0 {
        return Err(AttackError::Spec("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AttackError::Spec(format!("cannot start worker pool: {e}")))?;
    let start = Instant::now();
    let outcomes: Vec<SampleOutcome> = pool.install(|| {
        inputs
            .par_iter()
            .enumerate()
            .map(|(index, x)| {
                let t = Instant::now();
                let result = attack_one(model, x.as_ref(), spec, c, solver).map_err(|e| e.to_string());
                SampleOutcome {
                    index,
                    result,
                    ms: t.elapsed().as_secs_f64() * 1e3,
                }
            })
            .collect()
    });
    let elapsed = start.elapsed().as_secs_f64();
    for o in &outcomes {
        if let Err(e) = &o.result {
            log::warn!("{spec}: sample {} failed: {e}", o.index);
        }
    }
    let summary = summarize(spec, solver, &outcomes);
    Ok(BatchReport {
        spec: spec.clone(),
        outcomes,
        summary,
        elapsed,
    })
}

fn summarize(spec: &AttackSpec, solver: Solver, outcomes: &[SampleOutcome]) -> BatchSummary {
    let mpes: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().map(|r| r.mpe))
        .collect();
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| o.result.is_err())
        .map(|o| o.index.to_string())
        .collect();
    let stats = box_stats(&mpes).ok();
    let (eps, beta, imputation) = match *spec {
        AttackSpec::Integrity { eps, .. } => (Some(eps), None, None),
        AttackSpec::Availability { budget, imputation, .. } => (None, Some(budget), Some(imputation)),
    };
    let mean_ms = if outcomes.is_empty() {
        0.0
    } else {
        outcomes.iter().map(|o| o.ms).sum::<f64>() / outcomes.len() as f64
    };
    BatchSummary {
        kind: spec.kind().to_string(),
        mode: spec.mode(),
        eps,
        beta,
        imputation,
        solver,
        n: outcomes.len(),
        n_failed: failed.len(),
        failures: failed.join(";"),
        mpe_median: stats.map(|s| s.median),
        mpe_q1: stats.map(|s| s.q1),
        mpe_q3: stats.map(|s| s.q3),
        mpe_min: stats.map(|s| s.min),
        mpe_max: stats.map(|s| s.max),
        median_abs_mpe: median_abs(&mpes).ok(),
        mean_ms,
        results_file: String::new(),
    }
}

/// A row of the per-sample results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sample_index: usize,
    pub clean_forecast: f64,
    pub adv_forecast: f64,
    pub mpe_percent: f64,
    pub missing_count: Option<usize>,
    pub l_inf_norm_used: Option<f64>,
    /// Six `0/1` characters, `1` = delivered.
    pub mask_bits: Option<String>,
    pub nodes: usize,
    pub ms: f64,
}

const AVAILABILITY_HEADER: [&str; 8] = [
    "sample_index",
    "clean_forecast",
    "adv_forecast",
    "mpe_percent",
    "missing_count",
    "mask_bits",
    "nodes",
    "ms",
];
const INTEGRITY_HEADER: [&str; 7] = [
    "sample_index",
    "clean_forecast",
    "adv_forecast",
    "mpe_percent",
    "l_inf_norm_used",
    "nodes",
    "ms",
];

pub fn mask_bits(mask: &[bool]) -> String {
    mask.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Per-sample table of the successful attacks of a batch.
pub fn write_results_csv(path: &Path, report: &BatchReport) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    let availability = matches!(report.spec, AttackSpec::Availability { .. });
    if availability {
        w.write_record(AVAILABILITY_HEADER)?;
    } else {
        w.write_record(INTEGRITY_HEADER)?;
    }
    for o in &report.outcomes {
        let Ok(r) = &o.result else { continue };
        let mut rec = vec![
            o.index.to_string(),
            r.clean_forecast.to_string(),
            r.adversarial_forecast.to_string(),
            r.mpe.to_string(),
        ];
        if availability {
            rec.push(r.missing_count.unwrap_or(0).to_string());
            rec.push(r.mask.as_deref().map(mask_bits).unwrap_or_default());
        } else {
            rec.push(r.l_inf_norm.unwrap_or(0.0).to_string());
        }
        rec.push(r.stats.nodes.to_string());
        rec.push(o.ms.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_err(row: usize, column: &str, value: &str) -> csv::Error {
    csv::Error::from(std::io::Error::new(
        std::io::ErrorKind::InvalidData,
        format!("row {row}: cannot parse {column} value {value:?}"),
    ))
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>, csv::Error> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let availability = names == AVAILABILITY_HEADER;
    if !availability && names != INTEGRITY_HEADER {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unrecognised results header {names:?}"),
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |k: usize| rec.get(k).unwrap_or("");
        fn num<T: std::str::FromStr>(v: &str, row: usize, col: &str) -> Result<T, csv::Error> {
            v.parse().map_err(|_| parse_err(row, col, v))
        }
        let names = if availability {
            &AVAILABILITY_HEADER[..]
        } else {
            &INTEGRITY_HEADER[..]
        };
        let field = |k: usize| (get(k), names[k]);
        let (v, n) = field(0);
        let sample_index = num(v, row, n)?;
        let (v, n) = field(1);
        let clean_forecast = num(v, row, n)?;
        let (v, n) = field(2);
        let adv_forecast = num(v, row, n)?;
        let (v, n) = field(3);
        let mpe_percent = num(v, row, n)?;
        let (missing_count, l_inf_norm_used, mask, rest) = if availability {
            let (v, n) = field(4);
            let m: usize = num(v, row, n)?;
            let bits = get(5).to_string();
            if bits.len() != 6 || !bits.chars().all(|ch| ch == '0' || ch == '1') {
                return Err(parse_err(row, "mask_bits", &bits));
            }
            (Some(m), None, Some(bits), 6)
        } else {
            let (v, n) = field(4);
            (None, Some(num(v, row, n)?), None, 5)
        };
        let (v, n) = field(rest);
        let nodes = num(v, row, n)?;
        let (v, n) = field(rest + 1);
        let ms = num(v, row, n)?;
        rows.push(ResultRow {
            sample_index,
            clean_forecast,
            adv_forecast,
            mpe_percent,
            missing_count,
            l_inf_norm_used,
            mask_bits: mask,
            nodes,
            ms,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv(path: &Path, rows: &[BatchSummary]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<BatchSummary>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
