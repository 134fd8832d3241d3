//! Best-first branch-and-bound over the LP relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::simplex::{lp_solve, LpSolution, LpStatus};
use super::{MilpError, MilpProblem, MilpSolution, MilpStatus, Sense, INT_TOL, PRUNE_TOL, SOLUTION_TOL};

/// Maps an LP relaxation point to a candidate full assignment. Candidates are
/// checked for feasibility before they can become the incumbent.
pub type Heuristic<'a> = &'a (dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync);

#[derive(Clone, Copy)]
pub struct BbOptions<'a> {
    pub node_limit: usize,
    pub initial_incumbent: Option<&'a [f64]>,
    pub heuristic: Option<Heuristic<'a>>,
}

impl Default for BbOptions<'_> {
    fn default() -> Self {
        BbOptions {
            node_limit: 100_000,
            initial_incumbent: None,
            heuristic: None,
        }
    }
}

struct Node {
    /// Relaxation bound, as a minimisation value.
    bound: f64,
    id: usize,
    fixings: Vec<Option<bool>>,
    lp: LpSolution,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: the smallest bound, then the oldest node, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_bb(problem: &MilpProblem, node_limit: usize) -> Result<MilpSolution, MilpError> {
    solve_bb_with(
        problem,
        &BbOptions {
            node_limit,
            ..BbOptions::default()
        },
    )
}

struct Search<'p> {
    problem: &'p MilpProblem,
    sign: f64,
    incumbent: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    /// Snaps binaries to {0, 1} and keeps the point if it is feasible and
    /// strictly better than the incumbent.
    fn offer(&mut self, mut values: Vec<f64>) {
        let p = self.problem;
        if values.len() != p.n_vars() {
            return;
        }
        for v in &mut values[p.n_cont..] {
            *v = v.round();
        }
        if !p.is_feasible(&values, SOLUTION_TOL) {
            return;
        }
        let value = self.sign * p.objective_value(&values);
        if self
            .incumbent
            .as_ref()
            .is_none_or(|(best, _)| value < *best - PRUNE_TOL)
        {
            self.incumbent = Some((value, values));
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent
            .as_ref()
            .is_some_and(|(best, _)| bound >= *best - PRUNE_TOL)
    }
}

pub fn solve_bb_with(problem: &MilpProblem, opts: &BbOptions<'_>) -> Result<MilpSolution, MilpError> {
    let start = Instant::now();
    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let n_bin = problem.n_bin;
    let mut search = Search {
        problem,
        sign,
        incumbent: None,
    };
    if let Some(x) = opts.initial_incumbent {
        search.offer(x.to_vec());
    }

    let node_err = |node: usize| {
        move |e: MilpError| MilpError::Node {
            node,
            source: Box::new(e),
        }
    };
    let root = lp_solve(problem, &[]).map_err(node_err(0))?;
    let mut lp_iterations = root.iterations;
    let root_bound = root.objective;
    let mut heap = BinaryHeap::new();
    if root.status == LpStatus::Optimal {
        heap.push(Node {
            bound: sign * root.objective,
            id: 0,
            fixings: problem.bin_fixed.clone(),
            lp: root,
        });
    }
    let mut next_id = 1;
    let mut nodes_explored = 0;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        if search.prunable(node.bound) {
            // Best-first: every remaining node is at least as bad.
            heap.clear();
            break;
        }
        if nodes_explored >= opts.node_limit {
            heap.push(node);
            hit_limit = true;
            break;
        }
        nodes_explored += 1;
        let values = &node.lp.values;
        if let Some(h) = opts.heuristic {
            if let Some(candidate) = h(values) {
                search.offer(candidate);
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        for k in 0..n_bin {
            if node.fixings[k].is_some() {
                continue;
            }
            let v = values[problem.n_cont + k];
            let frac = (v - v.round()).abs();
            if frac > INT_TOL && branch.is_none_or(|(_, f)| frac > f) {
                branch = Some((k, frac));
            }
        }

        let Some((k, _)) = branch else {
            if node.fixings.iter().all(Option::is_some) {
                search.offer(values.clone());
            } else {
                let fixed: Vec<Option<bool>> = (0..n_bin)
                    .map(|k| node.fixings[k].or(Some(values[problem.n_cont + k] > 0.5)))
                    .collect();
                let lp = lp_solve(problem, &fixed).map_err(node_err(node.id))?;
                lp_iterations += lp.iterations;
                if lp.status == LpStatus::Optimal {
                    search.offer(lp.values);
                }
            }
            continue;
        };

        for value in [false, true] {
            let mut fixings = node.fixings.clone();
            fixings[k] = Some(value);
            let id = next_id;
            next_id += 1;
            let lp = lp_solve(problem, &fixings).map_err(node_err(id))?;
            lp_iterations += lp.iterations;
            if lp.status != LpStatus::Optimal {
                continue;
            }
            let bound = sign * lp.objective;
            if !search.prunable(bound) {
                heap.push(Node { bound, id, fixings, lp });
            }
        }
    }

    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let (status, objective, values, gap) = match search.incumbent {
        Some((best, values)) => {
            let gap = if hit_limit { (best - open_bound).max(0.0) } else { 0.0 };
            let status = if hit_limit && gap > PRUNE_TOL {
                MilpStatus::NodeLimit
            } else {
                MilpStatus::Optimal
            };
            (status, sign * best, values, gap)
        }
        None if hit_limit => (MilpStatus::NodeLimit, f64::NAN, Vec::new(), f64::INFINITY),
        None => (MilpStatus::Infeasible, f64::NAN, Vec::new(), f64::INFINITY),
    };
    let (x_cont, x_bin) = if values.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (
            values[..problem.n_cont].to_vec(),
            values[problem.n_cont..].iter().map(|&v| v > 0.5).collect(),
        )
    };
    Ok(MilpSolution {
        status,
        objective,
        x_cont,
        x_bin,
        root_bound,
        gap,
        nodes_explored,
        lp_iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Relation;
    use proptest::prelude::*;

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpProblem {
        let mut p = MilpProblem::new(Sense::Maximize);
        let bins: Vec<usize> = (0..values.len()).map(|k| p.add_bin(format!("b{k}"), None)).collect();
        p.add_constraint(
            bins.iter().zip(weights).map(|(&b, &w)| (b, w)).collect(),
            Relation::Le,
            cap,
        );
        p.objective = bins.iter().zip(values).map(|(&b, &v)| (b, v)).collect();
        p
    }

    fn brute_knapsack(values: &[f64], weights: &[f64], cap: f64) -> f64 {
        let n = values.len();
        (0..1u32 << n)
            .filter(|s| (0..n).filter(|k| s >> k & 1 == 1).map(|k| weights[k]).sum::<f64>() <= cap + 1e-9)
            .map(|s| (0..n).filter(|k| s >> k & 1 == 1).map(|k| values[k]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn small_knapsack() {
        let (v, w) = ([10.0, 13.0, 7.0, 8.0], [3.0, 4.0, 2.0, 3.0]);
        let s = solve_bb(&knapsack(&v, &w, 7.0), 1000).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective - brute_knapsack(&v, &w, 7.0)).abs() < 1e-9);
        assert!(s.root_bound >= s.objective - 1e-9);
    }

    #[test]
    fn all_fixed_solves_at_root() {
        let mut p = MilpProblem::new(Sense::Maximize);
        let x = p.add_cont("x", 0.0, 3.0);
        let a = p.add_bin("a", Some(true));
        let b = p.add_bin("b", Some(false));
        p.add_constraint(vec![(x, 1.0), (a, -1.0), (b, -1.0)], Relation::Le, 0.5);
        p.objective = vec![(x, 1.0)];
        let s = solve_bb(&p, 10).unwrap();
        assert_eq!(s.nodes_explored, 1);
        assert_eq!(s.x_bin, vec![true, false]);
        assert!((s.objective - 1.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_problem() {
        let mut p = MilpProblem::new(Sense::Minimize);
        let a = p.add_bin("a", None);
        let b = p.add_bin("b", None);
        p.add_constraint(vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.5);
        assert_eq!(solve_bb(&p, 100).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn node_limit_reports_gap() {
        let v: Vec<f64> = (0..12).map(|k| 3.0 + (k * 7 % 5) as f64 + 0.1 * k as f64).collect();
        let w: Vec<f64> = (0..12).map(|k| 2.0 + (k * 3 % 7) as f64 + 0.37).collect();
        let p = knapsack(&v, &w, 17.3);
        let s = solve_bb(&p, 1).unwrap();
        assert_eq!(s.nodes_explored, 1);
        assert!(matches!(s.status, MilpStatus::NodeLimit | MilpStatus::Optimal));
        if s.status == MilpStatus::NodeLimit {
            assert!(s.gap > 0.0);
        }
        let full = solve_bb(&p, 100_000).unwrap();
        assert!((full.objective - brute_knapsack(&v, &w, 17.3)).abs() < 1e-9);
    }

    #[test]
    fn initial_incumbent_is_used_and_checked() {
        let (v, w) = ([5.0, 4.0, 3.0], [4.0, 3.0, 2.0]);
        let p = knapsack(&v, &w, 5.0);
        // Infeasible proposal is ignored.
        let bad = [1.0, 1.0, 1.0];
        let s = solve_bb_with(
            &p,
            &BbOptions {
                initial_incumbent: Some(&bad),
                ..BbOptions::default()
            },
        )
        .unwrap();
        assert!((s.objective - 7.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let v: Vec<f64> = (0..10).map(|k| 1.0 + (k * 5 % 7) as f64).collect();
        let w: Vec<f64> = (0..10).map(|k| 1.0 + (k * 3 % 4) as f64).collect();
        let p = knapsack(&v, &w, 9.5);
        let a = solve_bb(&p, 10_000).unwrap();
        let b = solve_bb(&p, 10_000).unwrap();
        assert_eq!((a.nodes_explored, a.x_bin.clone()), (b.nodes_explored, b.x_bin.clone()));
        assert_eq!(a.objective, b.objective);
    }

    proptest! {
        #[test]
        fn knapsack_matches_enumeration(
            items in prop::collection::vec((0.1f64..10.0, 0.1f64..5.0), 1..9),
            cap in 0.0f64..15.0,
        ) {
            let (v, w): (Vec<f64>, Vec<f64>) = items.into_iter().unzip();
            let s = solve_bb(&knapsack(&v, &w, cap), 100_000).unwrap();
            prop_assert_eq!(s.status, MilpStatus::Optimal);
            prop_assert!((s.objective - brute_knapsack(&v, &w, cap)).abs() < 1e-6);
        }
    }
}
