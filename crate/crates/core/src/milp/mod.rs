//! Mixed-integer linear programs over bounded variables, the big-M
//! encodings of attack problems, and an exact branch-and-bound solver on top
//! of a dense bounded-variable simplex.
//!
//! Variables are indexed continuous-first: `0..n_cont` are continuous with
//! finite bounds, `n_cont..n_cont + n_bin` are binaries.

mod bb;
mod encode;
mod simplex;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bb::{solve_bb, solve_bb_with, BbOptions, Heuristic};
pub use encode::{encode_availability, encode_integrity, AttackLayout, EncodedAttack};
pub use simplex::{lp_solve, LpSolution, LpStatus};

/// Reduced-cost optimality tolerance of the simplex.
pub const LP_OPT_TOL: f64 = 1e-9;
/// Primal feasibility tolerance used inside the simplex.
pub const LP_FEAS_TOL: f64 = 1e-9;
/// A binary within this distance of 0 or 1 counts as integral.
pub const INT_TOL: f64 = 1e-6;
/// Absolute optimality gap of branch-and-bound.
pub const MILP_GAP: f64 = 1e-6;
/// A node is pruned when its bound cannot beat the incumbent by more than this.
pub const PRUNE_TOL: f64 = 1e-9;
/// Constraint satisfaction tolerance for accepted solutions.
pub const SOLUTION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("simplex exceeded {iterations} iterations (degenerate cycling)")]
    CycleLimit { iterations: usize },
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("invalid bounds at level {level}, unit {unit}: [{lower}, {upper}]")]
    InvalidBounds {
        level: usize,
        unit: usize,
        lower: f64,
        upper: f64,
    },
    #[error("attack budget {budget} outside 0..={max}")]
    BadBudget { budget: usize, max: usize },
    #[error("node {node}: {source}")]
    Node {
        node: usize,
        #[source]
        source: Box<MilpError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    /// Sparse coefficients over the full variable vector.
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) -> Self {
        LinearConstraint { terms, relation, rhs }
    }

    pub fn lhs(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.lhs(values);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpProblem {
    pub n_cont: usize,
    pub n_bin: usize,
    /// `[lo, hi]` for each continuous variable; must be finite.
    pub cont_bounds: Vec<(f64, f64)>,
    /// Binaries fixed before search (stable ReLUs); `None` is free in {0, 1}.
    pub bin_fixed: Vec<Option<bool>>,
    pub constraints: Vec<LinearConstraint>,
    /// Sparse linear objective over the full variable vector.
    pub objective: Vec<(usize, f64)>,
    pub sense: Sense,
    pub var_names: Vec<String>,
}

impl MilpProblem {
    pub fn new(sense: Sense) -> Self {
        MilpProblem {
            n_cont: 0,
            n_bin: 0,
            cont_bounds: Vec::new(),
            bin_fixed: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            sense,
            var_names: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_cont + self.n_bin
    }

    pub fn bin_index(&self, k: usize) -> usize {
        self.n_cont + k
    }

    /// Adds a continuous variable. Must be called before any binary is added.
    pub fn add_cont(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> usize {
        assert_eq!(self.n_bin, 0, "continuous variables precede binaries");
        self.cont_bounds.push((lo, hi));
        self.var_names.push(name.into());
        self.n_cont += 1;
        self.n_cont - 1
    }

    /// Adds a binary variable and returns its index in the full vector.
    pub fn add_bin(&mut self, name: impl Into<String>, fixed: Option<bool>) -> usize {
        self.bin_fixed.push(fixed);
        self.var_names.push(name.into());
        self.n_bin += 1;
        self.n_cont + self.n_bin - 1
    }

    pub fn add_constraint(&mut self, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(LinearConstraint::new(terms, relation, rhs));
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        if self.cont_bounds.len() != self.n_cont || self.bin_fixed.len() != self.n_bin {
            return Err(MilpError::InvalidProblem("variable counts disagree with bounds".into()));
        }
        for (j, &(lo, hi)) in self.cont_bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(MilpError::InvalidProblem(format!(
                    "variable {j} has bounds [{lo}, {hi}]"
                )));
            }
        }
        let n = self.n_vars();
        for (i, c) in self.constraints.iter().enumerate() {
            if c.terms.iter().any(|&(j, a)| j >= n || !a.is_finite()) || !c.rhs.is_finite() {
                return Err(MilpError::InvalidProblem(format!("constraint {i} is malformed")));
            }
        }
        if self.objective.iter().any(|&(j, c)| j >= n || !c.is_finite()) {
            return Err(MilpError::InvalidProblem("objective is malformed".into()));
        }
        Ok(())
    }

    /// Largest violation of any bound, row or integrality requirement.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &(lo, hi)) in self.cont_bounds.iter().enumerate() {
            worst = worst.max(lo - values[j]).max(values[j] - hi);
        }
        for k in 0..self.n_bin {
            let v = values[self.n_cont + k];
            worst = worst.max((v - v.round()).abs()).max(-v).max(v - 1.0);
            if let Some(f) = self.bin_fixed[k] {
                worst = worst.max((v - if f { 1.0 } else { 0.0 }).abs());
            }
        }
        for c in &self.constraints {
            worst = worst.max(c.violation(values));
        }
        worst
    }

    pub fn is_feasible(&self, values: &[f64], tol: f64) -> bool {
        values.len() == self.n_vars() && self.max_violation(values) <= tol
    }

    fn name(&self, j: usize) -> String {
        self.var_names
            .get(j)
            .filter(|s| !s.is_empty())
            .cloned()
            .unwrap_or_else(|| format!("x{j}"))
    }

    fn linear_text(&self, terms: &[(usize, f64)]) -> String {
        let mut s = String::new();
        for (k, &(j, a)) in terms.iter().enumerate() {
            if a < 0.0 {
                s.push_str(" -");
            } else if k > 0 {
                s.push_str(" +");
            }
            let _ = write!(s, " {} {}", a.abs(), self.name(j));
        }
        if s.is_empty() {
            s.push_str(" 0");
        }
        s
    }

    /// CPLEX-LP style text for cross-checking with external solvers.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::new();
        s.push_str(match self.sense {
            Sense::Minimize => "Minimize\n",
            Sense::Maximize => "Maximize\n",
        });
        let _ = writeln!(s, " obj:{}", self.linear_text(&self.objective));
        s.push_str("Subject To\n");
        for (i, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                s,
                " c{i}:{} {} {}",
                self.linear_text(&c.terms),
                c.relation.symbol(),
                c.rhs
            );
        }
        s.push_str("Bounds\n");
        for (j, &(lo, hi)) in self.cont_bounds.iter().enumerate() {
            let _ = writeln!(s, " {lo} <= {} <= {hi}", self.name(j));
        }
        for k in 0..self.n_bin {
            if let Some(f) = self.bin_fixed[k] {
                let _ = writeln!(s, " {} = {}", self.name(self.n_cont + k), u8::from(f));
            }
        }
        if self.n_bin > 0 {
            s.push_str("Binaries\n");
            for k in 0..self.n_bin {
                let _ = writeln!(s, " {}", self.name(self.n_cont + k));
            }
        }
        s.push_str("End\n");
        s
    }

    pub fn write_lp(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_lp_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Objective of the best integer solution (NaN when none was found).
    pub objective: f64,
    pub x_cont: Vec<f64>,
    pub x_bin: Vec<bool>,
    /// Objective of the root LP relaxation, in the problem's sense.
    pub root_bound: f64,
    /// Proved distance between the incumbent and the best open bound.
    pub gap: f64,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    pub wall_time: f64,
}

impl MilpSolution {
    pub fn values(&self) -> Vec<f64> {
        self.x_cont
            .iter()
            .copied()
            .chain(self.x_bin.iter().map(|&b| if b { 1.0 } else { 0.0 }))
            .collect()
    }
}
