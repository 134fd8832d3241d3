//! Interval bounds on every layer of a network over an input box.
//!
//! The MILP encodings need, for each hidden unit, an interval `[l, u]` that
//! contains its preactivation for *every* admissible input; those constants
//! become the big-M coefficients. Intervals are pushed layer by layer by
//! splitting each weight matrix into its positive and negative parts.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::dataset::{ImputationVector, N_FLEX};
use crate::network::Plnn;

/// Widening applied to the flexible coordinates of an availability box.
pub const DEFAULT_SLACK: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BoundsError {
    #[error("input box has {got} coordinates, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("empty interval at input coordinate {0}")]
    EmptyBox(usize),
}

/// `lower[0]/upper[0]` bound the network input; `lower[i]/upper[i]` for
/// `i >= 1` bound the preactivation `W_i z_i + b_i` of layer `i` (1-based),
/// so the last level bounds the output.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalStack {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    pub slack: f64,
}

impl IntervalStack {
    pub fn levels(&self) -> usize {
        self.lower.len()
    }

    /// Bounds on the preactivations of hidden layer `k` (0-based).
    pub fn hidden(&self, k: usize) -> (&[f64], &[f64]) {
        (&self.lower[k + 1], &self.upper[k + 1])
    }

    pub fn output(&self) -> (f64, f64) {
        let last = self.levels() - 1;
        (self.lower[last][0], self.upper[last][0])
    }

    /// True when every level of `preactivations` (as returned by a forward
    /// pass) lies inside the stack, with absolute tolerance `tol`.
    pub fn contains(&self, input: &[f64], preactivations: &[Vec<f64>], tol: f64) -> bool {
        let inside = |v: &[f64], lo: &[f64], hi: &[f64]| {
            v.iter()
                .zip(lo.iter().zip(hi))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
        };
        inside(input, &self.lower[0], &self.upper[0])
            && preactivations
                .iter()
                .enumerate()
                .all(|(i, pre)| inside(pre, &self.lower[i + 1], &self.upper[i + 1]))
    }

    /// CSV dump with columns `layer,unit,l,u`; layer 0 is the input box.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "layer,unit,l,u")?;
        for (layer, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            for (unit, (l, u)) in lo.iter().zip(hi).enumerate() {
                writeln!(f, "{layer},{unit},{l},{u}")?;
            }
        }
        f.flush()
    }
}

/// Number of attackable coordinates for an input of length `p`.
pub fn n_flexible(p: usize) -> usize {
    p.min(N_FLEX)
}

/// Box containing every imputed input `diag(m) x + diag(1 - m) c` over all
/// masks: flexible coordinates span `[min(c, x), max(c, x)]` widened by
/// `slack`, fixed coordinates are pinned to `x`.
pub fn init_bounds_availability(x: &[f64], c: &ImputationVector, slack: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lo = x.to_vec();
    let mut hi = x.to_vec();
    for j in 0..n_flexible(x.len()) {
        lo[j] = x[j].min(c.values[j]) - slack;
        hi[j] = x[j].max(c.values[j]) + slack;
    }
    (lo, hi)
}

/// l-infinity ball of radius `eps` on the flexible coordinates; fixed
/// coordinates pinned to `x`. No clamping to the scaled range.
pub fn init_bounds_integrity(x: &[f64], eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut lo = x.to_vec();
    let mut hi = x.to_vec();
    for j in 0..n_flexible(x.len()) {
        lo[j] = x[j] - eps;
        hi[j] = x[j] + eps;
    }
    (lo, hi)
}

pub fn propagate(model: &Plnn, l0: &[f64], u0: &[f64]) -> Result<IntervalStack, BoundsError> {
    propagate_with_slack(model, l0, u0, 0.0)
}

/// As [`propagate`], recording the slack that was used to build the box.
pub fn propagate_with_slack(model: &Plnn, l0: &[f64], u0: &[f64], slack: f64) -> Result<IntervalStack, BoundsError> {
    let p = model.input_dim();
    if l0.len() != p || u0.len() != p {
        return Err(BoundsError::DimensionMismatch {
            expected: p,
            got: l0.len().max(u0.len()),
        });
    }
    if let Some(j) = l0.iter().zip(u0).position(|(l, u)| !(l <= u)) {
        return Err(BoundsError::EmptyBox(j));
    }
    let mut lower = vec![l0.to_vec()];
    let mut upper = vec![u0.to_vec()];
    for (i, layer) in model.layers().iter().enumerate() {
        // The raw input is not a ReLU output, so it is not clipped at 0.
        let (lh, uh): (Vec<f64>, Vec<f64>) = if i == 0 {
            (lower[0].clone(), upper[0].clone())
        } else {
            (
                lower[i].iter().map(|v| v.max(0.0)).collect(),
                upper[i].iter().map(|v| v.max(0.0)).collect(),
            )
        };
        let mut lo = layer.bias.clone();
        let mut hi = layer.bias.clone();
        for r in 0..layer.rows {
            for (c, &w) in layer.row(r).iter().enumerate() {
                if w >= 0.0 {
                    lo[r] += w * lh[c];
                    hi[r] += w * uh[c];
                } else {
                    lo[r] += w * uh[c];
                    hi[r] += w * lh[c];
                }
            }
        }
        lower.push(lo);
        upper.push(hi);
    }
    Ok(IntervalStack { lower, upper, slack })
}
