//! Piecewise-linear feedforward forecaster.
//!
//! A network with `d` affine layers maps `z_1 = x` through
//! `z_{i+1} = max(0, W_i z_i + b_i)` for the hidden layers and ends with the
//! affine output `W_d z_d + b_d`, a scalar. Gradients are hand-written
//! reverse mode for this fixed architecture; the ReLU derivative at exactly
//! zero is taken as 0.

// Index loops mirror the matrix algebra and read better than zipped iterators here.
#![allow(clippy::needless_range_loop)]

mod io;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load, save, MODEL_FORMAT_VERSION};
pub use train::{
    cosine_lr, train, train_observed, train_with, write_history_csv, Adam, AdamConfig, BatchOutcome, EpochEval,
    EpochRecord, History, TrainConfig, TrainObjective,
};

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonfiniteLoss { epoch: usize, batch: usize },
    #[error("model file does not match its declared shape: {0}")]
    SchemaMismatch(String),
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("training objective failed: {0}")]
    Objective(String),
}

/// Dense affine map; `weights` is row-major `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Layer {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], bias: Vec<f64>) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        Layer {
            rows: rows.len(),
            cols,
            weights: rows.iter().flatten().copied().collect(),
            bias,
        }
    }

    #[inline]
    pub fn w(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    /// `W z + b`.
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(z).fold(self.bias[r], |acc, (w, v)| acc + w * v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plnn {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    /// Manifest hash of the dataset the weights were trained on, if known.
    pub trained_on: Option<String>,
}

/// Result of a forward pass with every intermediate kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub output: f64,
    /// `z_1 .. z_d`: the input followed by each hidden layer's post-ReLU output.
    pub activations: Vec<Vec<f64>>,
    /// `W_i z_i + b_i` for every layer; the last entry is the output.
    pub preactivations: Vec<Vec<f64>>,
}

impl Plnn {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NetworkError> {
        if layers.len() < 2 {
            return Err(NetworkError::InvalidArchitecture(format!(
                "need at least two layers, got {}",
                layers.len()
            )));
        }
        let mut dims = vec![layers[0].cols];
        for (i, l) in layers.iter().enumerate() {
            if l.cols != *dims.last().unwrap() {
                return Err(NetworkError::InvalidArchitecture(format!(
                    "layer {i} takes {} inputs but previous layer gives {}",
                    l.cols,
                    dims.last().unwrap()
                )));
            }
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(NetworkError::InvalidArchitecture(format!(
                    "layer {i} storage does not match {}x{}",
                    l.rows, l.cols
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(NetworkError::InvalidArchitecture(format!(
                    "layer {i} has non-finite entries"
                )));
            }
            dims.push(l.rows);
        }
        if *dims.last().unwrap() != 1 {
            return Err(NetworkError::InvalidArchitecture("output dimension must be 1".into()));
        }
        if dims.contains(&0) {
            return Err(NetworkError::InvalidArchitecture("zero-width layer".into()));
        }
        Ok(Plnn {
            dims,
            layers,
            trained_on: None,
        })
    }

    /// Uniform initialization in `±sqrt(1 / fan_in)` for weights and biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self, NetworkError> {
        if dims.len() < 3 {
            return Err(NetworkError::InvalidArchitecture(format!(
                "dims {dims:?} describe fewer than two layers"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (1.0 / fan_in.max(1) as f64).sqrt();
                let mut l = Layer::zeros(fan_out, fan_in);
                for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                    *v = rng.random_range(-bound..bound);
                }
                l
            })
            .collect();
        Plnn::new(layers)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    /// Widths of the hidden layers (everything between input and output).
    pub fn hidden_widths(&self) -> &[usize] {
        &self.dims[1..self.dims.len() - 1]
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NetworkError> {
        if x.len() != self.dims[0] {
            return Err(NetworkError::DimensionMismatch {
                expected: self.dims[0],
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward, NetworkError> {
        self.check_input(x)?;
        let d = self.layers.len();
        let mut activations = Vec::with_capacity(d);
        let mut preactivations = Vec::with_capacity(d);
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let pre = layer.apply(activations.last().unwrap());
            if i + 1 < d {
                activations.push(pre.iter().map(|v| v.max(0.0)).collect());
            }
            preactivations.push(pre);
        }
        Ok(Forward {
            output: preactivations[d - 1][0],
            activations,
            preactivations,
        })
    }

    /// Scalar forecast. Panics if `x` has the wrong length.
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dims[0], "input dimension");
        let d = self.layers.len();
        let mut z = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            z = layer.apply(&z);
            if i + 1 < d {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
        }
        z[0]
    }

    /// Gradient of the forecast with respect to the input.
    pub fn grad_input(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        let fwd = self.forward(x)?;
        let d = self.layers.len();
        let mut upstream = vec![1.0];
        for i in (0..d).rev() {
            let layer = &self.layers[i];
            if i + 1 < d {
                for (g, pre) in upstream.iter_mut().zip(&fwd.preactivations[i]) {
                    if *pre <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let mut down = vec![0.0; layer.cols];
            for r in 0..layer.rows {
                if upstream[r] == 0.0 {
                    continue;
                }
                for c in 0..layer.cols {
                    down[c] += layer.w(r, c) * upstream[r];
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Adds `scale * d(forecast)/d(theta)` at `x` into `grad`.
    fn accumulate_param_grad(&self, x: &[f64], scale: f64, grad: &mut Gradient, fwd: &Forward) {
        let d = self.layers.len();
        let mut delta = vec![scale];
        for i in (0..d).rev() {
            let layer = &self.layers[i];
            if i + 1 < d {
                for (g, pre) in delta.iter_mut().zip(&fwd.preactivations[i]) {
                    if *pre <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let input = if i == 0 { x } else { &fwd.activations[i][..] };
            let gl = &mut grad.layers[i];
            for r in 0..layer.rows {
                let dr = delta[r];
                if dr == 0.0 {
                    continue;
                }
                gl.bias[r] += dr;
                let row = &mut gl.weights[r * layer.cols..(r + 1) * layer.cols];
                for (g, v) in row.iter_mut().zip(input) {
                    *g += dr * v;
                }
            }
            if i > 0 {
                let mut down = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    if delta[r] == 0.0 {
                        continue;
                    }
                    for c in 0..layer.cols {
                        down[c] += layer.w(r, c) * delta[r];
                    }
                }
                delta = down;
            }
        }
    }
}

/// Same shape as a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
}

impl Gradient {
    pub fn zeros_like(model: &Plnn) -> Self {
        Gradient {
            layers: model.layers.iter().map(|l| Layer::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradient, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += scale * y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += scale * y;
            }
        }
    }

    /// Layer by layer: weights then bias.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.flatten().iter().all(|&v| v == 0.0)
    }
}

/// A labelled sample borrowed from a dataset.
pub type Sample<'a> = (&'a [f64], f64);

pub fn mse_loss(model: &Plnn, batch: &[Sample<'_>]) -> f64 {
    assert!(!batch.is_empty(), "mse over empty batch");
    let total: f64 = batch
        .iter()
        .map(|(x, y)| {
            let r = y - model.predict(x);
            r * r
        })
        .sum();
    total / batch.len() as f64
}

/// Exact gradient of [`mse_loss`] with respect to every weight and bias.
pub fn grad_params(model: &Plnn, batch: &[Sample<'_>]) -> Gradient {
    assert!(!batch.is_empty(), "gradient over empty batch");
    let mut grad = Gradient::zeros_like(model);
    let n = batch.len() as f64;
    for (x, y) in batch {
        let fwd = model.forward(x).expect("batch input dimension");
        let scale = -2.0 * (y - fwd.output) / n;
        if scale != 0.0 {
            model.accumulate_param_grad(x, scale, &mut grad, &fwd);
        }
    }
    grad
}

/// Parameters flattened in [`Gradient::flatten`] order.
pub fn flatten_params(model: &Plnn) -> Vec<f64> {
    model
        .layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

/// Inverse of [`flatten_params`].
pub fn set_params(model: &mut Plnn, flat: &[f64]) {
    assert_eq!(flat.len(), model.n_params());
    let mut it = flat.iter().copied();
    for l in &mut model.layers {
        for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
            *v = it.next().unwrap();
        }
    }
}
