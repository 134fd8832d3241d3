use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{grad_params, mse_loss, Gradient, NetworkError, Plnn, Sample};
use crate::dataset::Dataset;
use crate::metrics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Initial learning rate; cosine-annealed to 0 over `epochs`.
    pub lr0: f64,
    pub adam: AdamConfig,
    /// Seeds batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::full()
    }
}

impl TrainConfig {
    /// 150 epochs of Adam from lr 5e-4 with cosine annealing.
    pub fn full() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 64,
            lr0: 5e-4,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }

    /// Small setting used for synthetic experiments and tests.
    pub fn desk() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            lr0: 5e-3,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.epochs == 0 {
            return Err(NetworkError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NetworkError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(NetworkError::InvalidConfig(format!(
                "lr0 = {} is not a finite non-negative rate",
                self.lr0
            )));
        }
        Ok(())
    }
}

/// Learning rate for 0-based `epoch` out of `horizon`.
pub fn cosine_lr(lr0: f64, epoch: usize, horizon: usize) -> f64 {
    let t = epoch as f64 / horizon.max(1) as f64;
    0.5 * lr0 * (1.0 + (std::f64::consts::PI * t).cos())
}

pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(model: &Plnn, cfg: AdamConfig) -> Self {
        let n = model.n_params();
        Adam {
            cfg,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn step(&mut self, model: &mut Plnn, grad: &Gradient, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.cfg.beta1.powi(self.step);
        let c2 = 1.0 - self.cfg.beta2.powi(self.step);
        let mut k = 0;
        for (layer, gl) in model.layers_mut().iter_mut().zip(&grad.layers) {
            let params = layer.weights.iter_mut().chain(layer.bias.iter_mut());
            let grads = gl.weights.iter().chain(&gl.bias);
            for (p, &g) in params.zip(grads) {
                self.m[k] = self.cfg.beta1 * self.m[k] + (1.0 - self.cfg.beta1) * g;
                self.v[k] = self.cfg.beta2 * self.v[k] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
                k += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub gradient: Gradient,
    pub clean_loss: f64,
    pub adv_max_loss: Option<f64>,
    pub adv_min_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochEval {
    pub test_mape: f64,
    /// Model-selection criterion; the lowest-scoring epoch is returned.
    pub score: f64,
    pub median_abs_mpe_max: Option<f64>,
    pub median_abs_mpe_min: Option<f64>,
}

/// Supplies per-batch gradients and per-epoch evaluation to [`train_with`].
pub trait TrainObjective {
    fn batch(&mut self, model: &Plnn, batch: &[Sample<'_>]) -> Result<BatchOutcome, NetworkError>;
    fn evaluate(&mut self, model: &Plnn, test: &Dataset) -> Result<EpochEval, NetworkError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the clean batch losses seen during the epoch.
    pub train_mse: f64,
    pub adv_max_loss: Option<f64>,
    pub adv_min_loss: Option<f64>,
    pub test_mape: f64,
    pub median_abs_mpe_max: Option<f64>,
    pub median_abs_mpe_min: Option<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

pub(crate) fn test_mape(model: &Plnn, test: &Dataset) -> Result<f64, NetworkError> {
    let pred: Vec<f64> = test.x.iter().map(|x| model.predict(x)).collect();
    metrics::mape(&pred, &test.y).map_err(|e| NetworkError::Objective(e.to_string()))
}

struct Clean;

impl TrainObjective for Clean {
    fn batch(&mut self, model: &Plnn, batch: &[Sample<'_>]) -> Result<BatchOutcome, NetworkError> {
        Ok(BatchOutcome {
            gradient: grad_params(model, batch),
            clean_loss: mse_loss(model, batch),
            adv_max_loss: None,
            adv_min_loss: None,
        })
    }

    fn evaluate(&mut self, model: &Plnn, test: &Dataset) -> Result<EpochEval, NetworkError> {
        let mape = test_mape(model, test)?;
        Ok(EpochEval {
            test_mape: mape,
            score: mape,
            median_abs_mpe_max: None,
            median_abs_mpe_min: None,
        })
    }
}

/// Clean training: Adam on the batch MSE, keeping the epoch snapshot with the
/// lowest test MAPE.
pub fn train(
    model: &Plnn,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<(Plnn, History), NetworkError> {
    train_observed(model, train, test, cfg, &mut |_, _| {})
}

/// As [`train`], calling `observer` with the parameters after each epoch.
pub fn train_observed(
    model: &Plnn,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(usize, &Plnn),
) -> Result<(Plnn, History), NetworkError> {
    train_with(model, train, test, cfg, &mut Clean, observer)
}

fn weighted_mean(acc: Option<(f64, usize)>) -> Option<f64> {
    acc.map(|(s, n)| s / n as f64)
}

/// Shared training loop. `observer` sees the parameters after every epoch.
pub fn train_with(
    model: &Plnn,
    train: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    objective: &mut dyn TrainObjective,
    observer: &mut dyn FnMut(usize, &Plnn),
) -> Result<(Plnn, History), NetworkError> {
    cfg.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(NetworkError::InvalidConfig(
            "train and test sets must be nonempty".into(),
        ));
    }
    if let Some(x) = train.x.first() {
        if x.len() != model.input_dim() {
            return Err(NetworkError::DimensionMismatch {
                expected: model.input_dim(),
                got: x.len(),
            });
        }
    }
    let mut model = model.clone();
    let mut adam = Adam::new(&model, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, Plnn)> = None;

    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(cfg.lr0, epoch, cfg.epochs);
        order.shuffle(&mut rng);
        let mut clean_acc = 0.0;
        let mut max_acc: Option<(f64, usize)> = None;
        let mut min_acc: Option<(f64, usize)> = None;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Sample> = chunk.iter().map(|&i| (&train.x[i][..], train.y[i])).collect();
            let out = objective.batch(&model, &batch)?;
            let losses = [Some(out.clean_loss), out.adv_max_loss, out.adv_min_loss];
            if losses.iter().flatten().any(|l| !l.is_finite()) || out.gradient.flatten().iter().any(|g| !g.is_finite())
            {
                return Err(NetworkError::NonfiniteLoss { epoch, batch: b });
            }
            let n = batch.len();
            clean_acc += out.clean_loss * n as f64;
            if let Some(l) = out.adv_max_loss {
                let e = max_acc.get_or_insert((0.0, 0));
                e.0 += l * n as f64;
                e.1 += n;
            }
            if let Some(l) = out.adv_min_loss {
                let e = min_acc.get_or_insert((0.0, 0));
                e.0 += l * n as f64;
                e.1 += n;
            }
            adam.step(&mut model, &out.gradient, lr);
        }
        let eval = objective.evaluate(&model, test)?;
        log::debug!("epoch {epoch}: lr {lr:.3e} test MAPE {:.3}", eval.test_mape);
        history.epochs.push(EpochRecord {
            epoch,
            lr,
            train_mse: clean_acc / train.len() as f64,
            adv_max_loss: weighted_mean(max_acc),
            adv_min_loss: weighted_mean(min_acc),
            test_mape: eval.test_mape,
            median_abs_mpe_max: eval.median_abs_mpe_max,
            median_abs_mpe_min: eval.median_abs_mpe_min,
            score: eval.score,
        });
        observer(epoch, &model);
        if best.as_ref().is_none_or(|(s, _)| eval.score < *s) {
            history.best_epoch = epoch;
            best = Some((eval.score, model.clone()));
        }
    }
    let (_, mut best_model) = best.expect("at least one epoch");
    best_model.trained_on = model.trained_on.clone();
    Ok((best_model, history))
}

/// Clean-training history: `epoch,train_mse,test_mape,lr`.
pub fn write_history_csv(history: &History, path: &Path) -> Result<(), NetworkError> {
    let io = |e: std::io::Error| NetworkError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
    w.write_record(["epoch", "train_mse", "test_mape", "lr"])
        .map_err(|e| io(e.into()))?;
    for r in &history.epochs {
        w.write_record([
            r.epoch.to_string(),
            r.train_mse.to_string(),
            r.test_mape.to_string(),
            r.lr.to_string(),
        ])
        .map_err(|e| io(e.into()))?;
    }
    w.flush().map_err(io)
}
