use std::collections::HashMap;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{DatasetError, RawRecord, Timestamp, N_FLEX};

/// Where the calendar position of a row comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeColumns {
    /// Separate integer columns.
    Split {
        year: String,
        month: String,
        day: String,
        hour: String,
    },
    /// A single timestamp column parsed with a chrono format string.
    Single { column: String, format: String },
}

/// Maps the logical fields of a record onto CSV header names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub time: TimeColumns,
    /// Weather columns in flexible-feature order (K1..K6).
    pub weather: [String; N_FLEX],
    pub load: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            time: TimeColumns::Split {
                year: "year".into(),
                month: "month".into(),
                day: "day".into(),
                hour: "hour".into(),
            },
            weather: ["k1", "k2", "k3", "k4", "k5", "k6"].map(String::from),
            load: "load".into(),
        }
    }
}

fn column_index(headers: &HashMap<&str, usize>, name: &str) -> Result<usize, DatasetError> {
    headers
        .get(name.trim())
        .copied()
        .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
}

fn field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    col: usize,
    row: usize,
    name: &str,
) -> Result<T, DatasetError> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse().map_err(|_| DatasetError::UnparseableField {
        row,
        column: name.to_string(),
        value: raw.to_string(),
    })
}

/// Reads every data row of an hourly load CSV. Rows are numbered from 1
/// (the first line after the header) in error reports.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<RawRecord>, DatasetError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: display.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(file);
    let header_row = reader
        .headers()
        .map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?
        .clone();
    if header_row.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    let headers: HashMap<&str, usize> = header_row.iter().enumerate().map(|(i, h)| (h, i)).collect();

    enum TimeIdx {
        Split([(usize, String); 4]),
        Single(usize, String, String),
    }
    let time = match &schema.time {
        TimeColumns::Split { year, month, day, hour } => TimeIdx::Split([
            (column_index(&headers, year)?, year.clone()),
            (column_index(&headers, month)?, month.clone()),
            (column_index(&headers, day)?, day.clone()),
            (column_index(&headers, hour)?, hour.clone()),
        ]),
        TimeColumns::Single { column, format } => {
            TimeIdx::Single(column_index(&headers, column)?, column.clone(), format.clone())
        }
    };
    let mut weather_idx = [0usize; N_FLEX];
    for (slot, name) in weather_idx.iter_mut().zip(&schema.weather) {
        *slot = column_index(&headers, name)?;
    }
    let load_idx = column_index(&headers, &schema.load)?;

    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|source| DatasetError::Csv {
            path: display.clone(),
            source,
        })?;
        let timestamp = match &time {
            TimeIdx::Split(cols) => Timestamp {
                year: field(&rec, cols[0].0, row, &cols[0].1)?,
                month: field(&rec, cols[1].0, row, &cols[1].1)?,
                day: field(&rec, cols[2].0, row, &cols[2].1)?,
                hour: field(&rec, cols[3].0, row, &cols[3].1)?,
            },
            TimeIdx::Single(col, name, format) => {
                let raw = rec.get(*col).unwrap_or("").trim();
                let dt = NaiveDateTime::parse_from_str(raw, format).map_err(|_| DatasetError::UnparseableField {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                })?;
                Timestamp {
                    year: dt.year(),
                    month: dt.month(),
                    day: dt.day(),
                    hour: dt.hour(),
                }
            }
        };
        if !timestamp.is_valid() {
            return Err(DatasetError::InvalidTimestamp {
                row,
                reason: format!("{timestamp:?} out of range"),
            });
        }
        let mut weather = [0.0f64; N_FLEX];
        for (j, w) in weather.iter_mut().enumerate() {
            *w = field(&rec, weather_idx[j], row, &schema.weather[j])?;
        }
        let load: f64 = field(&rec, load_idx, row, &schema.load)?;
        for (j, w) in weather.iter().enumerate() {
            if !w.is_finite() {
                return Err(DatasetError::UnparseableField {
                    row,
                    column: schema.weather[j].clone(),
                    value: w.to_string(),
                });
            }
        }
        if !(load > 0.0 && load.is_finite()) {
            return Err(DatasetError::NonPositiveLoad { row, value: load });
        }
        out.push(RawRecord {
            timestamp,
            weather,
            load,
        });
    }
    if out.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    log::info!("{display}: read {} rows", out.len());
    Ok(out)
}
