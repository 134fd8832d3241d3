//! Dense bounded-variable primal simplex for the LP relaxations.
//!
//! Every row gets a slack (`[0, inf)` for `<=` rows after sign
//! normalisation, `[0, 0]` for equalities) and, where the starting point
//! violates it, an artificial. Phase one drives the artificials to zero,
//! phase two optimises the real objective. Nonbasic variables sit at one of
//! their bounds; bound flips avoid pivots when the entering variable reaches
//! its other bound first. Pricing is Dantzig's rule, switching to Bland's
//! rule after a run of degenerate pivots; the ratio test is the two-pass
//! Harris variant for pivot stability.

// The tableau is a flat row-major matrix; index arithmetic is the natural form.
#![allow(clippy::needless_range_loop)]

use super::{MilpError, MilpProblem, Relation, Sense, LP_FEAS_TOL, LP_OPT_TOL};

const MAX_ITERATIONS: usize = 50_000;
const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;
const REFRESH_EVERY: usize = 64;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective in the problem's own sense (NaN when infeasible).
    pub objective: f64,
    /// Values of all problem variables, binaries relaxed to [0, 1].
    pub values: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    fn infeasible(n: usize, iterations: usize) -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            objective: f64::NAN,
            values: vec![f64::NAN; n],
            iterations,
        }
    }
}

struct Tableau {
    m: usize,
    n: usize,
    /// `m x (n + 1)`, last column is `B^-1 b`.
    t: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    basic_row: Vec<usize>,
    d: Vec<f64>,
    iterations: usize,
}

enum Step {
    Optimal,
    Progress,
}

impl Tableau {
    #[inline]
    fn width(&self) -> usize {
        self.n + 1
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.n + 1) + j]
    }

    fn refresh_basics(&mut self) {
        let w = self.width();
        for i in 0..self.m {
            let row = &self.t[i * w..(i + 1) * w];
            let mut v = row[self.n];
            for j in 0..self.n {
                if self.basic_row[j] == NONE && row[j] != 0.0 {
                    v -= row[j] * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn refresh_reduced_costs(&mut self, cost: &[f64]) {
        let w = self.width();
        self.d.clear();
        self.d.extend_from_slice(cost);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * w..i * w + self.n];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width();
        let piv = self.at(r, q);
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        for chunk in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = chunk[q];
            if f != 0.0 {
                for (v, p) in chunk.iter_mut().zip(pivot_row.iter()) {
                    *v -= f * p;
                }
                chunk[q] = 0.0;
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for (dj, p) in self.d.iter_mut().zip(pivot_row.iter()) {
                *dj -= dq * p;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basic_row[leaving] = NONE;
        self.basis[r] = q;
        self.basic_row[q] = r;
    }

    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n {
            if self.basic_row[j] != NONE || self.hi[j] <= self.lo[j] {
                continue;
            }
            let dj = self.d[j];
            let dir = if !self.at_upper[j] && dj < -LP_OPT_TOL {
                1.0
            } else if self.at_upper[j] && dj > LP_OPT_TOL {
                -1.0
            } else {
                continue;
            };
            if bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, s)| dj.abs() > s) {
                best = Some((j, dir, dj.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn iterate(&mut self, bland: bool) -> Result<Step, MilpError> {
        let Some((q, dir)) = self.price(bland) else {
            return Ok(Step::Optimal);
        };
        let flip = self.hi[q] - self.lo[q];

        // Harris pass 1: largest step keeping every basic within tolerance.
        let mut relaxed = flip;
        for i in 0..self.m {
            let a = self.at(i, q) * dir;
            let b = self.basis[i];
            let lim = if a > PIVOT_TOL {
                (self.x[b] - self.lo[b] + LP_FEAS_TOL).max(0.0) / a
            } else if a < -PIVOT_TOL && self.hi[b].is_finite() {
                (self.hi[b] - self.x[b] + LP_FEAS_TOL).max(0.0) / -a
            } else {
                continue;
            };
            relaxed = relaxed.min(lim);
        }
        if relaxed.is_infinite() {
            return Err(MilpError::Unbounded);
        }

        // Pass 2: among rows blocking within that step, the largest pivot.
        let mut leave: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            let a = self.at(i, q) * dir;
            let b = self.basis[i];
            let lim = if a > PIVOT_TOL {
                (self.x[b] - self.lo[b]).max(0.0) / a
            } else if a < -PIVOT_TOL && self.hi[b].is_finite() {
                (self.hi[b] - self.x[b]).max(0.0) / -a
            } else {
                continue;
            };
            if lim > relaxed {
                continue;
            }
            let better = match leave {
                None => true,
                Some((r, best_a, _)) => {
                    if bland {
                        b < self.basis[r]
                    } else {
                        a.abs() > best_a.abs()
                    }
                }
            };
            if better {
                leave = Some((i, a, lim));
            }
        }

        let step = match leave {
            Some((_, _, lim)) if lim < flip => lim,
            _ => flip,
        };
        for i in 0..self.m {
            let a = self.at(i, q);
            if a != 0.0 {
                self.x[self.basis[i]] -= a * dir * step;
            }
        }
        match leave {
            Some((r, a, lim)) if lim < flip => {
                let b = self.basis[r];
                self.x[q] += dir * step;
                if a > 0.0 {
                    self.x[b] = self.lo[b];
                    self.at_upper[b] = false;
                } else {
                    self.x[b] = self.hi[b];
                    self.at_upper[b] = true;
                }
                self.pivot(r, q);
            }
            _ => {
                self.at_upper[q] = !self.at_upper[q];
                self.x[q] = if self.at_upper[q] { self.hi[q] } else { self.lo[q] };
            }
        }
        self.iterations += 1;
        Ok(Step::Progress)
    }

    fn run(&mut self, cost: &[f64]) -> Result<(), MilpError> {
        self.refresh_reduced_costs(cost);
        let mut degenerate = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if self.iterations >= MAX_ITERATIONS {
                return Err(MilpError::CycleLimit {
                    iterations: self.iterations,
                });
            }
            let before: f64 = self.objective(cost);
            match self.iterate(degenerate >= DEGENERATE_RUN)? {
                Step::Optimal => {
                    // Confirm optimality against freshly computed values.
                    self.refresh_basics();
                    self.refresh_reduced_costs(cost);
                    if self.price(false).is_none() {
                        return Ok(());
                    }
                }
                Step::Progress => {
                    since_refresh += 1;
                    if since_refresh >= REFRESH_EVERY {
                        self.refresh_basics();
                        self.refresh_reduced_costs(cost);
                        since_refresh = 0;
                    }
                    if self.objective(cost) < before - 1e-12 {
                        degenerate = 0;
                    } else {
                        degenerate += 1;
                    }
                }
            }
        }
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        cost.iter().zip(&self.x).map(|(c, v)| c * v).sum()
    }
}

/// Solves the LP relaxation of `problem` (binaries in [0, 1]) with the
/// binaries in `fixings` pinned. `fixings` may be empty or have one entry
/// per binary; it is combined with the problem's own fixed binaries.
pub fn lp_solve(problem: &MilpProblem, fixings: &[Option<bool>]) -> Result<LpSolution, MilpError> {
    problem.validate()?;
    let n_struct = problem.n_vars();
    let m = problem.constraints.len();

    let mut lo = Vec::with_capacity(n_struct + 2 * m);
    let mut hi = Vec::with_capacity(n_struct + 2 * m);
    for &(l, h) in &problem.cont_bounds {
        lo.push(l);
        hi.push(h);
    }
    for k in 0..problem.n_bin {
        let own = problem.bin_fixed[k];
        let extra = fixings.get(k).copied().flatten();
        let fixed = match (own, extra) {
            (Some(a), Some(b)) if a != b => return Ok(LpSolution::infeasible(n_struct, 0)),
            (a, b) => a.or(b),
        };
        match fixed {
            Some(v) => {
                let v = if v { 1.0 } else { 0.0 };
                lo.push(v);
                hi.push(v);
            }
            None => {
                lo.push(0.0);
                hi.push(1.0);
            }
        }
    }

    // Dense rows in `<=` / `=` form.
    let mut rows = vec![0.0; m * n_struct];
    let mut rhs = vec![0.0; m];
    let mut is_eq = vec![false; m];
    for (i, c) in problem.constraints.iter().enumerate() {
        let sign = if c.relation == Relation::Ge { -1.0 } else { 1.0 };
        for &(j, a) in &c.terms {
            rows[i * n_struct + j] += sign * a;
        }
        rhs[i] = sign * c.rhs;
        is_eq[i] = c.relation == Relation::Eq;
    }

    let x_struct: Vec<f64> = lo.clone();
    let residual: Vec<f64> = (0..m)
        .map(|i| {
            let row = &rows[i * n_struct..(i + 1) * n_struct];
            rhs[i] - row.iter().zip(&x_struct).map(|(a, v)| a * v).sum::<f64>()
        })
        .collect();
    let needs_art: Vec<bool> = (0..m)
        .map(|i| {
            if is_eq[i] {
                residual[i] != 0.0
            } else {
                residual[i] < 0.0
            }
        })
        .collect();
    let n_art = needs_art.iter().filter(|&&b| b).count();
    let n = n_struct + m + n_art;
    let w = n + 1;

    for i in 0..m {
        lo.push(0.0);
        hi.push(if is_eq[i] { 0.0 } else { f64::INFINITY });
    }
    lo.extend(std::iter::repeat_n(0.0, n_art));
    hi.extend(std::iter::repeat_n(f64::INFINITY, n_art));

    let mut t = vec![0.0; m * w];
    let mut x = vec![0.0; n];
    x[..n_struct].copy_from_slice(&x_struct);
    let mut basis = vec![0; m];
    let mut basic_row = vec![NONE; n];
    let mut art = n_struct + m;
    let mut phase_one_cost = vec![0.0; n];
    for i in 0..m {
        let row = &mut t[i * w..(i + 1) * w];
        row[..n_struct].copy_from_slice(&rows[i * n_struct..(i + 1) * n_struct]);
        row[n_struct + i] = 1.0;
        row[n] = rhs[i];
        if needs_art[i] {
            let sigma = if residual[i] > 0.0 { 1.0 } else { -1.0 };
            row[art] = sigma;
            for v in row.iter_mut() {
                *v *= sigma;
            }
            basis[i] = art;
            basic_row[art] = i;
            x[art] = residual[i].abs();
            phase_one_cost[art] = 1.0;
            art += 1;
        } else {
            basis[i] = n_struct + i;
            basic_row[n_struct + i] = i;
            x[n_struct + i] = residual[i];
        }
    }

    let mut tab = Tableau {
        m,
        n,
        t,
        lo,
        hi,
        x,
        at_upper: vec![false; n],
        basis,
        basic_row,
        d: vec![0.0; n],
        iterations: 0,
    };

    if n_art > 0 {
        tab.run(&phase_one_cost)?;
        let infeasibility: f64 = (n_struct + m..n).map(|j| tab.x[j].max(0.0)).sum();
        if infeasibility > PHASE_ONE_TOL {
            return Ok(LpSolution::infeasible(n_struct, tab.iterations));
        }
        for j in n_struct + m..n {
            tab.hi[j] = 0.0;
            if tab.basic_row[j] == NONE {
                tab.x[j] = 0.0;
                tab.at_upper[j] = false;
            }
        }
    }

    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; n];
    for &(j, c) in &problem.objective {
        cost[j] += sign * c;
    }
    tab.run(&cost)?;

    let values = tab.x[..n_struct].to_vec();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: problem.objective_value(&values),
        values,
        iterations: tab.iterations,
    })
}
