//! Adversarial training against availability attacks.
//!
//! Each batch solves, per sample, the forecast-maximising and
//! forecast-minimising masks within the budget, picks the worst and best
//! squared residual among them, and steps on
//! `clean + w_max * L_max + w_min * L_min` with the masks frozen (Danskin).

use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{availability_bruteforce, availability_milp, AttackSpec, Mode, Solver};
use crate::dataset::{make_imputation, Dataset, ImputationMode, ImputationVector};
use crate::metrics::{median_abs, mpe_term};
use crate::network::{
    grad_params, mse_loss, train_with, BatchOutcome, EpochEval, Gradient, History, NetworkError, Plnn, Sample,
    TrainConfig, TrainObjective,
};

/// What the inner problem optimises per sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerObjective {
    /// Worst and best squared residual among the two forecast extremes.
    #[default]
    SquaredError,
    /// The forecast-maximising and forecast-minimising masks themselves.
    ForecastExtremum,
}

impl FromStr for InnerObjective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "squared_error" => Ok(InnerObjective::SquaredError),
            "forecast_extremum" => Ok(InnerObjective::ForecastExtremum),
            _ => Err(format!(
                "unknown inner objective {s:?} (expected squared_error or forecast_extremum)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvTrainConfig {
    pub base: TrainConfig,
    pub budget: usize,
    pub imputation: ImputationMode,
    pub weight_max: f64,
    pub weight_min: f64,
    pub inner_solver: Solver,
    pub inner_objective: InnerObjective,
    /// Threads for the per-sample inner solves; results do not depend on it.
    pub workers: usize,
}

impl Default for AdvTrainConfig {
    fn default() -> Self {
        AdvTrainConfig {
            base: TrainConfig::full(),
            budget: 6,
            imputation: ImputationMode::Mean,
            weight_max: 1.0,
            weight_min: 1.0,
            inner_solver: Solver::Bruteforce,
            inner_objective: InnerObjective::SquaredError,
            workers: 1,
        }
    }
}

impl AdvTrainConfig {
    pub fn desk() -> Self {
        AdvTrainConfig {
            base: TrainConfig::desk(),
            ..AdvTrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        self.base.validate()?;
        let bad = |m: String| Err(NetworkError::InvalidConfig(m));
        if self.budget > 6 {
            return bad(format!("budget must be in 0..=6, got {}", self.budget));
        }
        for (name, w) in [("weight_max", self.weight_max), ("weight_min", self.weight_min)] {
            if !(w >= 0.0 && w.is_finite()) {
                return bad(format!("{name} must be finite and >= 0, got {w}"));
            }
        }
        if !matches!(self.inner_solver, Solver::Bruteforce | Solver::Milp) {
            return bad("inner solver must be bruteforce or milp".into());
        }
        if self.workers == 0 {
            return bad("workers must be >= 1".into());
        }
        Ok(())
    }
}

/// Forecast extremes of one sample over all masks within the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    pub mask_max: Vec<bool>,
    pub forecast_max: f64,
    pub mask_min: Vec<bool>,
    pub forecast_min: f64,
}

pub fn forecast_extremes(
    model: &Plnn,
    x: &[f64],
    c: &ImputationVector,
    budget: usize,
    solver: Solver,
) -> Result<Extremes, NetworkError> {
    let run = |mode| {
        let spec = AttackSpec::availability(mode, budget, c.mode);
        match solver {
            Solver::Milp => availability_milp(model, x, &spec, c),
            _ => availability_bruteforce(model, x, &spec, c),
        }
        .map_err(|e| NetworkError::Objective(e.to_string()))
    };
    let hi = run(Mode::Max)?;
    let lo = run(Mode::Min)?;
    Ok(Extremes {
        mask_max: hi.mask.expect("availability result has a mask"),
        forecast_max: hi.adversarial_forecast,
        mask_min: lo.mask.expect("availability result has a mask"),
        forecast_min: lo.adversarial_forecast,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialLoss {
    pub clean: f64,
    pub adv_max: f64,
    pub adv_min: f64,
    pub masks_max: Vec<Vec<bool>>,
    pub masks_min: Vec<Vec<bool>>,
}

fn inner_masks(ext: &Extremes, y: f64, objective: InnerObjective) -> (Vec<bool>, Vec<bool>) {
    match objective {
        InnerObjective::ForecastExtremum => (ext.mask_max.clone(), ext.mask_min.clone()),
        InnerObjective::SquaredError => {
            let r_hi = (y - ext.forecast_max).powi(2);
            let r_lo = (y - ext.forecast_min).powi(2);
            if r_lo > r_hi {
                (ext.mask_min.clone(), ext.mask_max.clone())
            } else {
                (ext.mask_max.clone(), ext.mask_min.clone())
            }
        }
    }
}

fn imputed_batch(batch: &[Sample<'_>], masks: &[Vec<bool>], c: &ImputationVector) -> Vec<(Vec<f64>, f64)> {
    batch
        .iter()
        .zip(masks)
        .map(|(&(x, y), m)| {
            let mut z = x.to_vec();
            for (j, &keep) in m.iter().enumerate() {
                if !keep {
                    z[j] = c.values[j];
                }
            }
            (z, y)
        })
        .collect()
}

fn as_samples(owned: &[(Vec<f64>, f64)]) -> Vec<Sample<'_>> {
    owned.iter().map(|(z, y)| (&z[..], *y)).collect()
}

fn solve_inner(
    model: &Plnn,
    batch: &[Sample<'_>],
    c: &ImputationVector,
    cfg: &AdvTrainConfig,
    pool: Option<&rayon::ThreadPool>,
) -> Result<Vec<Extremes>, NetworkError> {
    let one = |&(x, _): &Sample<'_>| forecast_extremes(model, x, c, cfg.budget, cfg.inner_solver);
    match pool {
        Some(p) => p.install(|| batch.par_iter().map(one).collect()),
        None => batch.iter().map(one).collect(),
    }
}

fn loss_from_extremes(
    model: &Plnn,
    batch: &[Sample<'_>],
    ext: &[Extremes],
    c: &ImputationVector,
    objective: InnerObjective,
) -> AdversarialLoss {
    let (masks_max, masks_min): (Vec<_>, Vec<_>) = ext
        .iter()
        .zip(batch)
        .map(|(e, &(_, y))| inner_masks(e, y, objective))
        .unzip();
    let adv_max = mse_loss(model, &as_samples(&imputed_batch(batch, &masks_max, c)));
    let adv_min = mse_loss(model, &as_samples(&imputed_batch(batch, &masks_min, c)));
    AdversarialLoss {
        clean: mse_loss(model, batch),
        adv_max,
        adv_min,
        masks_max,
        masks_min,
    }
}

/// Clean and adversarial batch losses with the masks that attain them.
pub fn adversarial_loss(
    model: &Plnn,
    batch: &[Sample<'_>],
    c: &ImputationVector,
    cfg: &AdvTrainConfig,
) -> Result<AdversarialLoss, NetworkError> {
    let ext = solve_inner(model, batch, c, cfg, None)?;
    Ok(loss_from_extremes(model, batch, &ext, c, cfg.inner_objective))
}

/// Gradient of the combined loss with each sample's masks held fixed.
/// Terms with zero weight are skipped, so zero weights give exactly the
/// clean gradient.
pub fn danskin_grad(
    model: &Plnn,
    batch: &[Sample<'_>],
    masks_max: &[Vec<bool>],
    masks_min: &[Vec<bool>],
    c: &ImputationVector,
    weight_max: f64,
    weight_min: f64,
) -> Gradient {
    let mut g = grad_params(model, batch);
    for (w, masks) in [(weight_max, masks_max), (weight_min, masks_min)] {
        if w != 0.0 {
            let owned = imputed_batch(batch, masks, c);
            g.add_scaled(&grad_params(model, &as_samples(&owned)), w);
        }
    }
    g
}

/// Median |MPE| on `test` under the forecast-max and forecast-min attacks.
pub fn adversarial_test_mpe(
    model: &Plnn,
    test: &Dataset,
    c: &ImputationVector,
    budget: usize,
    pool: Option<&rayon::ThreadPool>,
) -> Result<(f64, f64), NetworkError> {
    let one = |x: &crate::dataset::Features| -> Result<(f64, f64), NetworkError> {
        let e = forecast_extremes(model, x, c, budget, Solver::Bruteforce)?;
        let clean = model.predict(x);
        let term = |f| mpe_term(f, clean).ok_or_else(|| NetworkError::Objective("zero clean forecast".into()));
        Ok((term(e.forecast_max)?, term(e.forecast_min)?))
    };
    let terms: Vec<(f64, f64)> = match pool {
        Some(p) => p.install(|| test.x.par_iter().map(one).collect::<Result<_, _>>())?,
        None => test.x.iter().map(one).collect::<Result<_, _>>()?,
    };
    let (hi, lo): (Vec<f64>, Vec<f64>) = terms.into_iter().unzip();
    let med = |v: &[f64]| median_abs(v).map_err(|e| NetworkError::Objective(e.to_string()));
    Ok((med(&hi)?, med(&lo)?))
}

struct Adversarial<'a> {
    cfg: &'a AdvTrainConfig,
    c: ImputationVector,
    pool: Option<rayon::ThreadPool>,
}

impl TrainObjective for Adversarial<'_> {
    fn batch(&mut self, model: &Plnn, batch: &[Sample<'_>]) -> Result<BatchOutcome, NetworkError> {
        let ext = solve_inner(model, batch, &self.c, self.cfg, self.pool.as_ref())?;
        let loss = loss_from_extremes(model, batch, &ext, &self.c, self.cfg.inner_objective);
        let gradient = danskin_grad(
            model,
            batch,
            &loss.masks_max,
            &loss.masks_min,
            &self.c,
            self.cfg.weight_max,
            self.cfg.weight_min,
        );
        Ok(BatchOutcome {
            gradient,
            clean_loss: loss.clean,
            adv_max_loss: Some(loss.adv_max),
            adv_min_loss: Some(loss.adv_min),
        })
    }

    fn evaluate(&mut self, model: &Plnn, test: &Dataset) -> Result<EpochEval, NetworkError> {
        let pred: Vec<f64> = test.x.iter().map(|x| model.predict(x)).collect();
        let test_mape = crate::metrics::mape(&pred, &test.y).map_err(|e| NetworkError::Objective(e.to_string()))?;
        let (hi, lo) = adversarial_test_mpe(model, test, &self.c, self.cfg.budget, self.pool.as_ref())?;
        Ok(EpochEval {
            test_mape,
            score: test_mape + 0.5 * (hi + lo),
            median_abs_mpe_max: Some(hi),
            median_abs_mpe_min: Some(lo),
        })
    }
}

/// Adversarial training. The imputation vector is computed once from `train`
/// and the snapshot with the lowest `test MAPE + mean median |MPE|` is kept.
pub fn advtrain(
    model: &Plnn,
    train: &Dataset,
    test: &Dataset,
    cfg: &AdvTrainConfig,
) -> Result<(Plnn, History), NetworkError> {
    advtrain_observed(model, train, test, cfg, &mut |_, _| {})
}

/// As [`advtrain`], calling `observer` with the parameters after each epoch.
pub fn advtrain_observed(
    model: &Plnn,
    train: &Dataset,
    test: &Dataset,
    cfg: &AdvTrainConfig,
    observer: &mut dyn FnMut(usize, &Plnn),
) -> Result<(Plnn, History), NetworkError> {
    cfg.validate()?;
    let pool = if cfg.workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.workers)
                .build()
                .map_err(|e| NetworkError::InvalidConfig(format!("cannot start worker pool: {e}")))?,
        )
    } else {
        None
    };
    let mut objective = Adversarial {
        cfg,
        c: make_imputation(train, cfg.imputation),
        pool,
    };
    train_with(model, train, test, &cfg.base, &mut objective, observer)
}

/// `epoch,clean_loss,adv_max_loss,adv_min_loss,test_mape,test_median_abs_mpe_max,test_median_abs_mpe_min,lr`
pub fn write_advtrain_history_csv(history: &History, path: &Path) -> Result<(), NetworkError> {
    let io = |e: csv::Error| NetworkError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record([
        "epoch",
        "clean_loss",
        "adv_max_loss",
        "adv_min_loss",
        "test_mape",
        "test_median_abs_mpe_max",
        "test_median_abs_mpe_min",
        "lr",
    ])
    .map_err(io)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in &history.epochs {
        w.write_record([
            r.epoch.to_string(),
            r.train_mse.to_string(),
            opt(r.adv_max_loss),
            opt(r.adv_min_loss),
            r.test_mape.to_string(),
            opt(r.median_abs_mpe_max),
            opt(r.median_abs_mpe_min),
            r.lr.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))
}
