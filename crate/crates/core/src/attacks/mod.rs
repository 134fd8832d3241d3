//! Attack drivers: exact integrity and availability attacks through the MILP
//! encodings, the PGD baseline, the brute-force mask oracle and a parallel
//! batch runner.

mod batch;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    init_bounds_availability, init_bounds_integrity, n_flexible, propagate, propagate_with_slack, BoundsError,
    DEFAULT_SLACK,
};
use crate::dataset::{ImputationMode, ImputationVector};
use crate::metrics::mpe_term;
use crate::milp::{encode_availability, encode_integrity, MilpError, MilpStatus, Sense};
use crate::network::{NetworkError, Plnn};

pub use batch::{
    batch_attack, mask_bits, read_results_csv, read_summary_csv, write_results_csv, write_summary_csv, BatchReport,
    BatchSummary, ResultRow, SampleOutcome,
};

/// Node budget for a single attack solve.
pub const NODE_LIMIT: usize = 200_000;
/// Agreement required between a solver objective and the forward pass.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("solver stopped at the node limit with gap {gap}")]
    NodeLimit { gap: f64 },
    #[error("attack problem reported infeasible")]
    Infeasible,
    #[error("solver objective {objective} not reproduced by forward pass ({forward})")]
    Unverified { objective: f64, forward: f64 },
    #[error("clean forecast is zero; percentage error undefined")]
    ZeroClean,
}

/// Direction of the attack on the forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Max,
    Min,
}

impl Mode {
    pub fn sense(self) -> Sense {
        match self {
            Mode::Max => Sense::Maximize,
            Mode::Min => Sense::Minimize,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Max => "max",
            Mode::Min => "min",
        }
    }

    /// True when `a` is a strictly better attack value than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Mode::Max => a > b,
            Mode::Min => a < b,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" => Ok(Mode::Max),
            "min" => Ok(Mode::Min),
            _ => Err(format!("unknown mode {s:?} (expected max or min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PgdConfig {
    pub steps: usize,
    /// Defaults to a tenth of the radius.
    pub step_size: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            steps: 40,
            step_size: None,
            restarts: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum AttackSpec {
    Integrity {
        mode: Mode,
        eps: f64,
        #[serde(default)]
        pgd: PgdConfig,
    },
    Availability {
        mode: Mode,
        budget: usize,
        imputation: ImputationMode,
    },
}

impl AttackSpec {
    pub fn integrity(mode: Mode, eps: f64) -> Self {
        AttackSpec::Integrity {
            mode,
            eps,
            pgd: PgdConfig::default(),
        }
    }

    pub fn availability(mode: Mode, budget: usize, imputation: ImputationMode) -> Self {
        AttackSpec::Availability {
            mode,
            budget,
            imputation,
        }
    }

    pub fn mode(&self) -> Mode {
        match self {
            AttackSpec::Integrity { mode, .. } | AttackSpec::Availability { mode, .. } => *mode,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AttackSpec::Integrity { .. } => "integrity",
            AttackSpec::Availability { .. } => "availability",
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        match *self {
            AttackSpec::Integrity { eps, pgd, .. } => {
                if !(eps >= 0.0 && eps.is_finite()) {
                    return Err(AttackError::Spec(format!("eps must be finite and >= 0, got {eps}")));
                }
                if let Some(s) = pgd.step_size {
                    if !(s >= 0.0 && s.is_finite()) {
                        return Err(AttackError::Spec(format!(
                            "PGD step size must be finite and >= 0, got {s}"
                        )));
                    }
                }
                Ok(())
            }
            AttackSpec::Availability { budget, .. } => {
                if budget > 6 {
                    return Err(AttackError::Spec(format!("budget must be in 0..=6, got {budget}")));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackSpec::Integrity { mode, eps, .. } => write!(f, "INTE({mode}, {eps})"),
            AttackSpec::Availability {
                mode,
                budget,
                imputation,
            } => write!(f, "AVAI({mode}, {}, {budget})", imputation.as_str()),
        }
    }
}

/// Which procedure computes the attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Milp,
    Pgd,
    Bruteforce,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Solver::Milp => "milp",
            Solver::Pgd => "pgd",
            Solver::Bruteforce => "bruteforce",
        }
    }
}

impl FromStr for Solver {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "milp" => Ok(Solver::Milp),
            "pgd" => Ok(Solver::Pgd),
            "bruteforce" => Ok(Solver::Bruteforce),
            _ => Err(format!("unknown solver {s:?} (expected milp, pgd or bruteforce)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Branch-and-bound nodes (0 for PGD and enumeration).
    pub nodes: usize,
    pub forward_passes: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub clean_forecast: f64,
    pub adversarial_forecast: f64,
    /// Input the model sees under attack (the imputed input for availability).
    pub adversarial_input: Vec<f64>,
    /// Availability only: `true` = feature delivered.
    pub mask: Option<Vec<bool>>,
    /// Signed percentage deviation from the clean forecast.
    pub mpe: f64,
    /// Availability only: number of blocked features.
    pub missing_count: Option<usize>,
    /// Integrity only: realised l-infinity size of the perturbation.
    pub l_inf_norm: Option<f64>,
    pub stats: SolverStats,
}

fn finish(
    model: &Plnn,
    x: &[f64],
    input: Vec<f64>,
    mask: Option<Vec<bool>>,
    stats: SolverStats,
) -> Result<AttackResult, AttackError> {
    let clean = model.predict(x);
    let adv = model.predict(&input);
    let mpe = mpe_term(adv, clean).ok_or(AttackError::ZeroClean)?;
    let (missing_count, l_inf_norm) = match &mask {
        Some(m) => (Some(m.iter().filter(|b| !**b).count()), None),
        None => {
            let n = n_flexible(x.len());
            let norm = input[..n].iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            (None, Some(norm))
        }
    };
    Ok(AttackResult {
        clean_forecast: clean,
        adversarial_forecast: adv,
        adversarial_input: input,
        mask,
        mpe,
        missing_count,
        l_inf_norm,
        stats,
    })
}

fn check_solution(sol: &crate::milp::MilpSolution) -> Result<(), AttackError> {
    match sol.status {
        MilpStatus::Optimal => Ok(()),
        MilpStatus::Infeasible => Err(AttackError::Infeasible),
        MilpStatus::NodeLimit => Err(AttackError::NodeLimit { gap: sol.gap }),
    }
}

fn verify(objective: f64, forward: f64) -> Result<(), AttackError> {
    if (objective - forward).abs() > VERIFY_TOL {
        return Err(AttackError::Unverified { objective, forward });
    }
    Ok(())
}

fn integrity_params(spec: &AttackSpec) -> Result<(Mode, f64, PgdConfig), AttackError> {
    spec.validate()?;
    match *spec {
        AttackSpec::Integrity { mode, eps, pgd } => Ok((mode, eps, pgd)),
        _ => Err(AttackError::Spec("expected an integrity spec".into())),
    }
}

fn availability_params(spec: &AttackSpec) -> Result<(Mode, usize), AttackError> {
    spec.validate()?;
    match *spec {
        AttackSpec::Availability { mode, budget, .. } => Ok((mode, budget)),
        _ => Err(AttackError::Spec("expected an availability spec".into())),
    }
}

/// Globally optimal forecast extremum over the radius-`eps` ball on the
/// flexible features.
pub fn integrity_milp(model: &Plnn, x: &[f64], spec: &AttackSpec) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let (mode, eps, _) = integrity_params(spec)?;
    let (l0, u0) = init_bounds_integrity(x, eps);
    let bounds = propagate(model, &l0, &u0)?;
    let enc = encode_integrity(model, x, eps, &bounds, mode.sense())?;
    let sol = enc.solve(model, NODE_LIMIT)?;
    check_solution(&sol)?;
    let values = sol.values();
    let input: Vec<f64> = enc
        .input_from(&values)
        .iter()
        .zip(&l0)
        .zip(&u0)
        .map(|((v, lo), hi)| v.clamp(*lo, *hi))
        .collect();
    verify(sol.objective, model.predict(&input))?;
    let stats = SolverStats {
        nodes: sol.nodes_explored,
        forward_passes: 0,
        wall_time: start.elapsed().as_secs_f64(),
    };
    finish(model, x, input, None, stats)
}

/// Sign-gradient ascent (or descent in min mode) with random restarts; the
/// first restart starts from the clean input.
pub fn integrity_pgd(model: &Plnn, x: &[f64], spec: &AttackSpec) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let (mode, eps, pgd) = integrity_params(spec)?;
    let n_flex = n_flexible(x.len());
    let step = pgd.step_size.unwrap_or(eps / 10.0);
    let sigma = match mode {
        Mode::Max => 1.0,
        Mode::Min => -1.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(pgd.seed);
    let mut best_input = x.to_vec();
    let mut best = model.predict(x);
    let mut passes = 1;
    for restart in 0..pgd.restarts.max(1) {
        let mut delta = vec![0.0; n_flex];
        if restart > 0 && eps > 0.0 {
            for d in &mut delta {
                *d = rng.random_range(-eps..=eps);
            }
        }
        let mut z = x.to_vec();
        for s in 0..=pgd.steps {
            for j in 0..n_flex {
                z[j] = x[j] + delta[j];
            }
            let f = model.predict(&z);
            passes += 1;
            if mode.better(f, best) {
                best = f;
                best_input.clone_from(&z);
            }
            if s == pgd.steps {
                break;
            }
            let g = model.grad_input(&z)?;
            for j in 0..n_flex {
                let dir = if g[j] > 0.0 {
                    1.0
                } else if g[j] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                delta[j] = (delta[j] + step * dir * sigma).clamp(-eps, eps);
            }
        }
    }
    let stats = SolverStats {
        nodes: 0,
        forward_passes: passes,
        wall_time: start.elapsed().as_secs_f64(),
    };
    finish(model, x, best_input, None, stats)
}

/// Globally optimal mask within the budget. The reported forecast comes from
/// a forward pass on the imputed input, which must agree with the solver.
pub fn availability_milp(
    model: &Plnn,
    x: &[f64],
    spec: &AttackSpec,
    c: &ImputationVector,
) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let (mode, budget) = availability_params(spec)?;
    let (l0, u0) = init_bounds_availability(x, c, DEFAULT_SLACK);
    let bounds = propagate_with_slack(model, &l0, &u0, DEFAULT_SLACK)?;
    let enc = encode_availability(model, x, c, budget, &bounds, mode.sense())?;
    let sol = enc.solve(model, NODE_LIMIT)?;
    check_solution(&sol)?;
    let mask = enc.mask_from(&sol.values());
    let input = enc.imputed_input(&mask);
    verify(sol.objective, model.predict(&input))?;
    let stats = SolverStats {
        nodes: sol.nodes_explored,
        forward_passes: 1,
        wall_time: start.elapsed().as_secs_f64(),
    };
    finish(model, x, input, Some(mask), stats)
}

/// Masks over `n` features blocking at most `budget`, fewest blocked first,
/// then blocked index sets in lexicographic order.
pub fn masks_within_budget(n: usize, budget: usize) -> Vec<Vec<bool>> {
    fn combos(n: usize, k: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<bool>>) {
        if cur.len() == k {
            let mut m = vec![true; n];
            for &j in cur.iter() {
                m[j] = false;
            }
            out.push(m);
            return;
        }
        for j in from..n {
            cur.push(j);
            combos(n, k, j + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=budget.min(n) {
        combos(n, k, 0, &mut Vec::new(), &mut out);
    }
    out
}

fn imputed(x: &[f64], c: &ImputationVector, mask: &[bool]) -> Vec<f64> {
    let mut z = x.to_vec();
    for (j, &m) in mask.iter().enumerate() {
        if !m {
            z[j] = c.values[j];
        }
    }
    z
}

/// Exhaustive search over every mask within the budget. Among equally good
/// masks the first in enumeration order wins.
pub fn availability_bruteforce(
    model: &Plnn,
    x: &[f64],
    spec: &AttackSpec,
    c: &ImputationVector,
) -> Result<AttackResult, AttackError> {
    let start = Instant::now();
    let (mode, budget) = availability_params(spec)?;
    if x.len() != model.input_dim() {
        return Err(NetworkError::DimensionMismatch {
            expected: model.input_dim(),
            got: x.len(),
        }
        .into());
    }
    let masks = masks_within_budget(n_flexible(x.len()), budget);
    let mut best: Option<(f64, &Vec<bool>)> = None;
    for m in &masks {
        let f = model.predict(&imputed(x, c, m));
        if best.is_none_or(|(b, _)| mode.better(f, b)) {
            best = Some((f, m));
        }
    }
    let (_, mask) = best.expect("the full mask is always enumerated");
    let stats = SolverStats {
        nodes: 0,
        forward_passes: masks.len(),
        wall_time: start.elapsed().as_secs_f64(),
    };
    finish(model, x, imputed(x, c, mask), Some(mask.clone()), stats)
}

/// Dispatches one sample to the requested procedure.
pub fn attack_one(
    model: &Plnn,
    x: &[f64],
    spec: &AttackSpec,
    c: &ImputationVector,
    solver: Solver,
) -> Result<AttackResult, AttackError> {
    match (spec, solver) {
        (AttackSpec::Integrity { .. }, Solver::Milp) => integrity_milp(model, x, spec),
        (AttackSpec::Integrity { .. }, Solver::Pgd) => integrity_pgd(model, x, spec),
        (AttackSpec::Availability { .. }, Solver::Milp) => availability_milp(model, x, spec, c),
        (AttackSpec::Availability { .. }, Solver::Bruteforce) => availability_bruteforce(model, x, spec, c),
        (s, v) => Err(AttackError::Spec(format!(
            "{} attacks cannot use the {} solver",
            s.kind(),
            v.as_str()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn imp(values: [f64; 12]) -> ImputationVector {
        ImputationVector {
            mode: ImputationMode::Mean,
            values,
        }
    }

    fn sample(seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..12).map(|_| Rng::random_range(&mut r, 0.0..1.0)).collect()
    }

    /// Model whose output is `5 + w·x` through one always-active unit.
    fn linear_model(w: [f64; 12]) -> Plnn {
        Plnn::new(vec![
            Layer::from_rows(&[w.to_vec()], vec![10.0]),
            Layer::from_rows(&[vec![1.0]], vec![-5.0]),
        ])
        .unwrap()
    }

    #[test]
    fn mask_enumeration_order_and_counts() {
        let m = masks_within_budget(6, 1);
        assert_eq!(m.len(), 7);
        assert_eq!(m[0], vec![true; 6]);
        assert_eq!(m[1], vec![false, true, true, true, true, true]);
        assert_eq!(masks_within_budget(6, 6).len(), 64);
        let two = masks_within_budget(6, 2);
        assert_eq!(two.len(), 1 + 6 + 15);
        assert_eq!(two[7], vec![false, false, true, true, true, true]);
        assert_eq!(two[8], vec![false, true, false, true, true, true]);
    }

    #[test]
    fn bruteforce_counts_forward_passes() {
        let model = Plnn::init(&[12, 8, 1], 1).unwrap();
        let x = sample(0);
        let c = imp([0.5; 12]);
        let r = availability_bruteforce(
            &model,
            &x,
            &AttackSpec::availability(Mode::Max, 6, ImputationMode::Mean),
            &c,
        )
        .unwrap();
        assert_eq!(r.stats.forward_passes, 64);
        let r = availability_bruteforce(
            &model,
            &x,
            &AttackSpec::availability(Mode::Max, 1, ImputationMode::Mean),
            &c,
        )
        .unwrap();
        assert_eq!(r.stats.forward_passes, 7);
    }

    #[test]
    fn zero_budget_and_zero_radius_do_nothing() {
        let model = Plnn::init(&[12, 16, 8, 1], 4).unwrap();
        let x = sample(2);
        let c = imp([0.0; 12]);
        for mode in [Mode::Max, Mode::Min] {
            let r =
                availability_milp(&model, &x, &AttackSpec::availability(mode, 0, ImputationMode::Zero), &c).unwrap();
            assert_eq!(r.mask, Some(vec![true; 6]));
            assert_eq!(r.mpe, 0.0);
            let spec = AttackSpec::integrity(mode, 0.0);
            let r = integrity_milp(&model, &x, &spec).unwrap();
            assert!(r.mpe.abs() < 1e-9);
            let r = integrity_pgd(&model, &x, &spec).unwrap();
            assert_eq!(r.adversarial_forecast, r.clean_forecast);
        }
    }

    #[test]
    fn pgd_without_steps_returns_clean() {
        let model = Plnn::init(&[12, 16, 8, 1], 4).unwrap();
        let x = sample(5);
        let spec = AttackSpec::Integrity {
            mode: Mode::Max,
            eps: 0.1,
            pgd: PgdConfig {
                steps: 0,
                restarts: 1,
                ..PgdConfig::default()
            },
        };
        let r = integrity_pgd(&model, &x, &spec).unwrap();
        assert_eq!(r.adversarial_forecast, r.clean_forecast);
    }

    #[test]
    fn pgd_on_linear_model_reaches_the_corner() {
        let w = [0.3, -0.2, 0.0, 0.5, -0.1, 0.4, 0.7, 0.1, -0.3, 0.2, 0.05, -0.6];
        let model = linear_model(w);
        let x = sample(7);
        let eps = 0.1;
        for mode in [Mode::Max, Mode::Min] {
            let spec = AttackSpec::Integrity {
                mode,
                eps,
                pgd: PgdConfig {
                    steps: 1,
                    step_size: Some(eps),
                    restarts: 1,
                    seed: 0,
                },
            };
            let pgd = integrity_pgd(&model, &x, &spec).unwrap();
            let milp = integrity_milp(&model, &x, &spec).unwrap();
            let shift: f64 = w[..6].iter().map(|v| v.abs() * eps).sum();
            let expected = model.predict(&x) + if mode == Mode::Max { shift } else { -shift };
            assert!((pgd.adversarial_forecast - expected).abs() < 1e-12);
            assert!((milp.adversarial_forecast - expected).abs() < 1e-7);
        }
    }

    #[test]
    fn integrity_radius_is_monotone_and_dominates_pgd() {
        let model = Plnn::init(&[12, 16, 8, 1], 8).unwrap();
        for s in 0..6 {
            let x = sample(100 + s);
            let small = integrity_milp(&model, &x, &AttackSpec::integrity(Mode::Max, 0.1)).unwrap();
            let big = integrity_milp(&model, &x, &AttackSpec::integrity(Mode::Max, 0.2)).unwrap();
            assert!(big.adversarial_forecast >= small.adversarial_forecast - 1e-9);
            assert!(small.l_inf_norm.unwrap() <= 0.1 + 1e-12);
            let pgd = integrity_pgd(&model, &x, &AttackSpec::integrity(Mode::Max, 0.1)).unwrap();
            assert!(small.adversarial_forecast >= pgd.adversarial_forecast - 1e-6);
        }
    }

    #[test]
    fn availability_tie_gives_equal_objectives() {
        // Features 0 and 1 enter symmetrically, so blocking either is a tie.
        let mut w = [0.0; 12];
        w[0] = 1.0;
        w[1] = 1.0;
        let model = linear_model(w);
        let mut x = [0.5; 12];
        x[0] = 0.2;
        x[1] = 0.2;
        let c = imp([0.9; 12]);
        let spec = AttackSpec::availability(Mode::Max, 1, ImputationMode::Mean);
        let a = availability_milp(&model, &x, &spec, &c).unwrap();
        let b = availability_bruteforce(&model, &x, &spec, &c).unwrap();
        assert!((a.adversarial_forecast - b.adversarial_forecast).abs() < 1e-9);
        assert_eq!(b.mask, Some(vec![false, true, true, true, true, true]));
    }

    #[test]
    fn wrong_solver_is_rejected() {
        let model = Plnn::init(&[12, 4, 1], 0).unwrap();
        let c = imp([0.0; 12]);
        let r = attack_one(
            &model,
            &sample(1),
            &AttackSpec::integrity(Mode::Max, 0.1),
            &c,
            Solver::Bruteforce,
        );
        assert!(matches!(r, Err(AttackError::Spec(_))));
        assert!(AttackSpec::availability(Mode::Max, 7, ImputationMode::Zero)
            .validate()
            .is_err());
        assert!(AttackSpec::integrity(Mode::Max, -0.1).validate().is_err());
    }

    #[test]
    fn spec_labels() {
        assert_eq!(
            AttackSpec::availability(Mode::Min, 6, ImputationMode::Mean).to_string(),
            "AVAI(min, mean, 6)"
        );
        assert_eq!(AttackSpec::integrity(Mode::Max, 0.1).to_string(), "INTE(max, 0.1)");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn milp_matches_oracle(seed in 0u64..500, xs in 0u64..500, budget in 0usize..=6, max in any::<bool>(), mean in any::<bool>()) {
            let model = Plnn::init(&[12, 10, 6, 1], seed).unwrap();
            let x = sample(xs);
            let c = if mean { imp([0.5; 12]) } else { imp([0.0; 12]) };
            let mode = if max { Mode::Max } else { Mode::Min };
            let spec = AttackSpec::availability(mode, budget, ImputationMode::Mean);
            let a = availability_milp(&model, &x, &spec, &c).unwrap();
            let b = availability_bruteforce(&model, &x, &spec, &c).unwrap();
            prop_assert!((a.adversarial_forecast - b.adversarial_forecast).abs() <= 1e-6);
            prop_assert!(a.missing_count.unwrap() <= budget);
            match mode {
                Mode::Max => prop_assert!(a.adversarial_forecast >= a.clean_forecast - 1e-6),
                Mode::Min => prop_assert!(a.adversarial_forecast <= a.clean_forecast + 1e-6),
            }
        }

        #[test]
        fn zero_mpe_iff_no_mask_raises(seed in 0u64..500, xs in 0u64..500, budget in 1usize..=6) {
            let model = Plnn::init(&[12, 10, 6, 1], seed).unwrap();
            let x = sample(xs);
            let c = imp([0.0; 12]);
            let spec = AttackSpec::availability(Mode::Max, budget, ImputationMode::Zero);
            let r = availability_bruteforce(&model, &x, &spec, &c).unwrap();
            let none_raise = masks_within_budget(6, budget)
                .iter()
                .all(|m| model.predict(&imputed(&x, &c, m)) <= r.clean_forecast);
            prop_assert_eq!(r.mpe == 0.0, none_raise);
        }
    }
}
