//! Synthetic hourly load data with known structure, used as a desk-scale
//! substitute for a real load table.
//!
//! Weather channels are i.i.d. uniform on [0, 1]; calendar fields advance one
//! hour per row from 2017-01-01 00:00. The load is `synth_target` of the
//! encoded features plus Gaussian noise. The target is dominated by the daily
//! and seasonal cycle, with temperature, humidity and cloud cover adding a
//! smaller weather-driven component, as in metered urban loads.

use chrono::{Datelike, Duration, NaiveDate, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Features, RawRecord, Timestamp, N_FLEX};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the additive Gaussian noise on the load.
    pub noise: f64,
}

impl SynthConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SynthConfig { n, seed, noise: 0.01 }
    }
}

/// Noise-free load as a function of the 12 encoded features.
pub fn synth_target(x: &Features) -> f64 {
    let [pressure, cloud, humidity, temp, wind_dir, wind_speed] = [x[0], x[1], x[2], x[3], x[4], x[5]];
    let (m_sin, m_cos, _d_sin, d_cos, h_sin, h_cos) = (x[6], x[7], x[8], x[9], x[10], x[11]);
    let calendar = 1.0 + 0.12 * m_cos + 0.05 * m_sin - 0.18 * h_cos + 0.08 * h_sin + 0.02 * d_cos;
    let weather = 0.09 * (temp - 0.5) + 0.06 * (temp - 0.5) * (temp - 0.5) + 0.04 * humidity * temp - 0.03 * cloud
        + 0.02 * (std::f64::consts::PI * pressure).sin()
        + 0.015 * wind_speed * (1.0 - wind_dir);
    calendar + weather
}

pub fn synth_records(cfg: &SynthConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("finite noise scale");
    let start = NaiveDate::from_ymd_opt(2017, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    (0..cfg.n)
        .map(|i| {
            let t = start + Duration::hours(i as i64);
            let timestamp = Timestamp {
                year: t.year(),
                month: t.month(),
                day: t.day(),
                hour: t.hour(),
            };
            let mut weather = [0.0; N_FLEX];
            for w in &mut weather {
                *w = rng.random::<f64>();
            }
            let mut x = [0.0; 12];
            x[..N_FLEX].copy_from_slice(&weather);
            x[N_FLEX..].copy_from_slice(&super::encode_temporal(&timestamp));
            let load = synth_target(&x) + noise.sample(&mut rng);
            RawRecord {
                timestamp,
                weather,
                load,
            }
        })
        .collect()
}

/// Encoded (unscaled) synthetic dataset. Deterministic in `seed`.
pub fn synth_generate(n: usize, seed: u64) -> Dataset {
    Dataset::from_records(&synth_records(&SynthConfig::new(n, seed)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FLEX_IDX;

    #[test]
    fn deterministic_under_seed() {
        assert_eq!(synth_generate(100, 1), synth_generate(100, 1));
        assert_ne!(synth_generate(100, 1), synth_generate(100, 2));
    }

    #[test]
    fn flexible_block_in_unit_box_and_loads_positive() {
        let ds = synth_generate(2000, 5);
        assert_eq!(ds.x[0].len(), 12);
        for (row, y) in ds.samples() {
            assert!(row[FLEX_IDX].iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(y > 0.0);
        }
    }

    #[test]
    fn target_correlates_with_load() {
        let ds = synth_generate(2000, 9);
        let g: Vec<f64> = ds.x.iter().map(synth_target).collect();
        let n = g.len() as f64;
        let (mg, my) = (g.iter().sum::<f64>() / n, ds.y.iter().sum::<f64>() / n);
        let cov: f64 = g.iter().zip(&ds.y).map(|(a, b)| (a - mg) * (b - my)).sum();
        let vg: f64 = g.iter().map(|a| (a - mg).powi(2)).sum();
        let vy: f64 = ds.y.iter().map(|b| (b - my).powi(2)).sum();
        let corr = cov / (vg * vy).sqrt();
        assert!(corr > 0.9, "correlation {corr}");
    }

    #[test]
    fn hourly_clock_advances() {
        let r = synth_records(&SynthConfig::new(30, 0));
        assert_eq!(r[0].timestamp.hour, 0);
        assert_eq!(r[25].timestamp.day, 2);
        assert_eq!(r[25].timestamp.hour, 1);
    }
}
