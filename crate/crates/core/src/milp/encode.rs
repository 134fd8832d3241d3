//! Big-M encodings of integrity and availability attacks on a ReLU network.
//!
//! For hidden unit `r` with preactivation bounds `[l, u]` and `û = max(u, 0)`,
//! `ľ = min(l, 0)`:
//!
//! ```text
//! z >= W z_prev + b
//! z <= û v
//! W z_prev + b >= z + (1 - v) ľ
//! 0 <= z <= û,  v in {0, 1}
//! ```
//!
//! Units that are stable over the whole box keep their binary, fixed to the
//! known phase before search.

use crate::bounds::{n_flexible, IntervalStack};
use crate::dataset::ImputationVector;
use crate::network::Plnn;

use super::bb::{solve_bb_with, BbOptions};
use super::{MilpError, MilpProblem, MilpSolution, Relation, Sense};

/// Absolute widening of the output variable's bounds beyond the IBP interval.
const OUTPUT_PAD: f64 = 1e-7;
const BOX_TOL: f64 = 1e-12;

/// Where each network quantity lives in the variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackLayout {
    /// `z_1`, one per input coordinate.
    pub input: Vec<usize>,
    /// Post-ReLU variables of each hidden layer.
    pub hidden: Vec<Vec<usize>>,
    pub output: usize,
    /// Phase indicators of each hidden layer.
    pub relu_bins: Vec<Vec<usize>>,
    /// Availability mask `m` (1 = feature delivered); empty for integrity.
    pub mask_bins: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Kind {
    Integrity,
    Availability { c: Vec<f64>, budget: usize },
}

#[derive(Debug, Clone)]
pub struct EncodedAttack {
    pub problem: MilpProblem,
    pub layout: AttackLayout,
    x: Vec<f64>,
    kind: Kind,
}

fn check_dims(model: &Plnn, x: &[f64], bounds: &IntervalStack) -> Result<(), MilpError> {
    if x.len() != model.input_dim() {
        return Err(MilpError::InvalidProblem(format!(
            "input has {} coordinates, network expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    let ok = bounds.levels() == model.dims().len()
        && bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .zip(model.dims())
            .all(|((l, u), &d)| l.len() == d && u.len() == d);
    if !ok {
        return Err(MilpError::InvalidProblem(
            "bounds do not match the network shape".into(),
        ));
    }
    for (level, (lo, hi)) in bounds.lower.iter().zip(&bounds.upper).enumerate() {
        for (unit, (&l, &u)) in lo.iter().zip(hi).enumerate() {
            if !(l <= u) || !l.is_finite() || !u.is_finite() {
                return Err(MilpError::InvalidBounds {
                    level,
                    unit,
                    lower: l,
                    upper: u,
                });
            }
        }
    }
    Ok(())
}

/// Adds the network below the input variables and returns the layout.
fn encode_network(
    p: &mut MilpProblem,
    model: &Plnn,
    input_box: &[(f64, f64)],
    bounds: &IntervalStack,
    n_mask: usize,
) -> Result<AttackLayout, MilpError> {
    for (unit, &(lo, hi)) in input_box.iter().enumerate() {
        let tol = BOX_TOL * (1.0 + lo.abs().max(hi.abs()));
        if lo < bounds.lower[0][unit] - tol || hi > bounds.upper[0][unit] + tol {
            return Err(MilpError::InvalidBounds {
                level: 0,
                unit,
                lower: bounds.lower[0][unit],
                upper: bounds.upper[0][unit],
            });
        }
    }
    let input: Vec<usize> = input_box
        .iter()
        .enumerate()
        .map(|(j, &(lo, hi))| p.add_cont(format!("z1_{j}"), lo, hi))
        .collect();
    let layers = model.layers();
    let d = layers.len();
    let mut hidden: Vec<Vec<usize>> = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        let (_, hi) = bounds.hidden(k);
        let vars = hi
            .iter()
            .enumerate()
            .map(|(r, &u)| p.add_cont(format!("z{}_{r}", k + 2), 0.0, u.max(0.0)))
            .collect();
        hidden.push(vars);
    }
    let (out_lo, out_hi) = bounds.output();
    let pad = |v: f64| OUTPUT_PAD * (1.0 + v.abs());
    let output = p.add_cont("y", out_lo - pad(out_lo), out_hi + pad(out_hi));

    let mut relu_bins: Vec<Vec<usize>> = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        let (lo, hi) = bounds.hidden(k);
        let bins = lo
            .iter()
            .zip(hi)
            .enumerate()
            .map(|(r, (&l, &u))| {
                let fixed = if u <= 0.0 {
                    Some(false)
                } else if l >= 0.0 {
                    Some(true)
                } else {
                    None
                };
                p.add_bin(format!("v{}_{r}", k + 2), fixed)
            })
            .collect();
        relu_bins.push(bins);
    }
    let mask_bins: Vec<usize> = (0..n_mask).map(|j| p.add_bin(format!("m{j}"), None)).collect();

    for k in 0..d - 1 {
        let layer = &layers[k];
        let prev: &[usize] = if k == 0 { &input } else { &hidden[k - 1] };
        let (lo, hi) = bounds.hidden(k);
        for r in 0..layer.rows {
            let z = hidden[k][r];
            let v = relu_bins[k][r];
            let u_hat = hi[r].max(0.0);
            let l_hat = lo[r].min(0.0);
            let b = layer.bias[r];
            let affine: Vec<(usize, f64)> = prev
                .iter()
                .zip(layer.row(r))
                .filter(|(_, &w)| w != 0.0)
                .map(|(&j, &w)| (j, w))
                .collect();

            let mut t = vec![(z, 1.0)];
            t.extend(affine.iter().map(|&(j, w)| (j, -w)));
            p.add_constraint(t, Relation::Ge, b);

            p.add_constraint(vec![(z, 1.0), (v, -u_hat)], Relation::Le, 0.0);

            let mut t = affine.clone();
            t.push((z, -1.0));
            t.push((v, l_hat));
            p.add_constraint(t, Relation::Ge, l_hat - b);
        }
    }
    let last = &layers[d - 1];
    let prev = &hidden[d - 2];
    let mut t = vec![(output, 1.0)];
    t.extend(
        prev.iter()
            .zip(last.row(0))
            .filter(|(_, &w)| w != 0.0)
            .map(|(&j, &w)| (j, -w)),
    );
    p.add_constraint(t, Relation::Eq, last.bias[0]);

    p.objective = vec![(output, 1.0)];
    Ok(AttackLayout {
        input,
        hidden,
        output,
        relu_bins,
        mask_bins,
    })
}

/// Extremum of the forecast over the l-infinity ball of radius `eps` on the
/// flexible coordinates of `x`, fixed coordinates pinned.
pub fn encode_integrity(
    model: &Plnn,
    x: &[f64],
    eps: f64,
    bounds: &IntervalStack,
    sense: Sense,
) -> Result<EncodedAttack, MilpError> {
    check_dims(model, x, bounds)?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(MilpError::InvalidProblem(format!(
            "radius {eps} is not a finite non-negative number"
        )));
    }
    let n_flex = n_flexible(x.len());
    let input_box: Vec<(f64, f64)> = x
        .iter()
        .enumerate()
        .map(|(j, &v)| if j < n_flex { (v - eps, v + eps) } else { (v, v) })
        .collect();
    let mut problem = MilpProblem::new(sense);
    let layout = encode_network(&mut problem, model, &input_box, bounds, 0)?;
    Ok(EncodedAttack {
        problem,
        layout,
        x: x.to_vec(),
        kind: Kind::Integrity,
    })
}

/// Extremum of the forecast over all masks blocking at most `budget`
/// flexible features, blocked features replaced by `c`.
pub fn encode_availability(
    model: &Plnn,
    x: &[f64],
    c: &ImputationVector,
    budget: usize,
    bounds: &IntervalStack,
    sense: Sense,
) -> Result<EncodedAttack, MilpError> {
    check_dims(model, x, bounds)?;
    let n_flex = n_flexible(x.len());
    if budget > n_flex {
        return Err(MilpError::BadBudget { budget, max: n_flex });
    }
    let cv = &c.values[..n_flex];
    let input_box: Vec<(f64, f64)> = x
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            if j < n_flex {
                (v.min(cv[j]), v.max(cv[j]))
            } else {
                (v, v)
            }
        })
        .collect();
    let mut problem = MilpProblem::new(sense);
    let layout = encode_network(&mut problem, model, &input_box, bounds, n_flex)?;
    for j in 0..n_flex {
        problem.add_constraint(
            vec![(layout.input[j], 1.0), (layout.mask_bins[j], -(x[j] - cv[j]))],
            Relation::Eq,
            cv[j],
        );
    }
    problem.add_constraint(
        layout.mask_bins.iter().map(|&m| (m, -1.0)).collect(),
        Relation::Le,
        budget as f64 - n_flex as f64,
    );
    Ok(EncodedAttack {
        problem,
        layout,
        x: x.to_vec(),
        kind: Kind::Availability { c: cv.to_vec(), budget },
    })
}

impl EncodedAttack {
    /// Full assignment induced by feeding `input` through the network.
    /// `mask` fills the availability binaries (ignored for integrity).
    pub fn assignment(&self, model: &Plnn, input: &[f64], mask: &[bool]) -> Vec<f64> {
        let fwd = model.forward(input).expect("input matches network");
        let l = &self.layout;
        let mut values = vec![0.0; self.problem.n_vars()];
        for (&j, &v) in l.input.iter().zip(input) {
            values[j] = v;
        }
        for (k, vars) in l.hidden.iter().enumerate() {
            for (r, &j) in vars.iter().enumerate() {
                values[j] = fwd.activations[k + 1][r];
                let bin = l.relu_bins[k][r];
                let active = match self.problem.bin_fixed[bin - self.problem.n_cont] {
                    Some(f) => f,
                    None => fwd.preactivations[k][r] > 0.0,
                };
                values[bin] = if active { 1.0 } else { 0.0 };
            }
        }
        values[l.output] = fwd.output;
        for (&j, &m) in l.mask_bins.iter().zip(mask) {
            values[j] = if m { 1.0 } else { 0.0 };
        }
        values
    }

    /// Input produced by `mask` (availability) after imputation.
    pub fn imputed_input(&self, mask: &[bool]) -> Vec<f64> {
        let mut z = self.x.clone();
        if let Kind::Availability { c, .. } = &self.kind {
            for (j, &m) in mask.iter().enumerate().take(c.len()) {
                if !m {
                    z[j] = c[j];
                }
            }
        }
        z
    }

    /// The attack-free point: full mask or zero perturbation.
    pub fn clean_assignment(&self, model: &Plnn) -> Vec<f64> {
        let mask = vec![true; self.layout.mask_bins.len()];
        self.assignment(model, &self.x, &mask)
    }

    pub fn mask_from(&self, values: &[f64]) -> Vec<bool> {
        self.layout.mask_bins.iter().map(|&j| values[j] > 0.5).collect()
    }

    pub fn input_from(&self, values: &[f64]) -> Vec<f64> {
        self.layout.input.iter().map(|&j| values[j]).collect()
    }

    /// Turns an LP point into a feasible attack by rounding the mask (within
    /// budget) or clamping the input, then running the network forward.
    pub fn repair(&self, model: &Plnn, lp_values: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Integrity => {
                let input: Vec<f64> = self
                    .layout
                    .input
                    .iter()
                    .map(|&j| {
                        let (lo, hi) = self.problem.cont_bounds[j];
                        lp_values[j].clamp(lo, hi)
                    })
                    .collect();
                self.assignment(model, &input, &[])
            }
            Kind::Availability { budget, .. } => {
                let n = self.layout.mask_bins.len();
                let mut order: Vec<usize> = (0..n).collect();
                let m = |j: usize| lp_values[self.layout.mask_bins[j]];
                order.sort_by(|&a, &b| m(b).total_cmp(&m(a)).then(a.cmp(&b)));
                let mut mask = vec![false; n];
                for (rank, &j) in order.iter().enumerate() {
                    mask[j] = rank < n - budget || m(j) > 0.5;
                }
                self.assignment(model, &self.imputed_input(&mask), &mask)
            }
        }
    }

    /// Branch-and-bound with the clean point as starting incumbent and the
    /// forward-pass repair as heuristic.
    pub fn solve(&self, model: &Plnn, node_limit: usize) -> Result<MilpSolution, MilpError> {
        let start = self.clean_assignment(model);
        let heuristic = |v: &[f64]| Some(self.repair(model, v));
        solve_bb_with(
            &self.problem,
            &BbOptions {
                node_limit,
                initial_incumbent: Some(&start),
                heuristic: Some(&heuristic),
            },
        )
    }
}
