//! Acceptance suite. Prints one line per criterion and exits nonzero if any
//! hard criterion fails. Runtime limits are the ones stated for a 4-core
//! machine and are checked as written.
//!
//! Criterion 10 runs only when LOADGUARD_REAL_CSV points at the public
//! load dataset (LOADGUARD_REAL_SCHEMA may give a TOML column schema).

use std::path::Path;
use std::time::Instant;

use loadguard::advtrain::{advtrain, advtrain_observed, danskin_grad, AdvTrainConfig};
use loadguard::attacks::{
    availability_bruteforce, availability_milp, batch_attack, integrity_milp, integrity_pgd, write_results_csv,
    AttackSpec, BatchReport, Mode, Solver,
};
use loadguard::bounds::{init_bounds_availability, init_bounds_integrity, propagate, DEFAULT_SLACK};
use loadguard::dataset::{
    load_csv, prepare, synth_records, CsvSchema, Features, ImputationMode, PrepareConfig, Prepared, SynthConfig,
    N_FEATURES, N_FLEX,
};
use loadguard::metrics::mape;
use loadguard::network::{
    flatten_params, grad_params, mse_loss, set_params, train, train_observed, Plnn, Sample, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DESK_DIMS: [usize; 4] = [12, 16, 8, 1];
const IMPUTATIONS: [ImputationMode; 2] = [ImputationMode::Zero, ImputationMode::Mean];
const MODES: [Mode; 2] = [Mode::Max, Mode::Min];

#[derive(PartialEq)]
enum Verdict {
    Pass,
    Fail,
    Warn,
    Skip,
}

struct Line {
    id: &'static str,
    name: &'static str,
    verdict: Verdict,
    detail: String,
}

fn line(id: &'static str, name: &'static str, ok: bool, detail: String) -> Line {
    Line {
        id,
        name,
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail,
    }
}

struct Desk {
    data: Prepared,
    clean: Plnn,
    init: Plnn,
    cfg: TrainConfig,
}

/// Synthetic 2000-row dataset and a 12-16-8-1 model trained for 50 epochs.
fn desk(seed: u64) -> Desk {
    let records = synth_records(&SynthConfig::new(2000, seed));
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed,
            source: format!("synthetic:2000:{seed}"),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&DESK_DIMS, seed).expect("init");
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::desk()
    };
    let (clean, _) = train(&init, &data.train, &data.test, &cfg).expect("train");
    Desk { data, clean, init, cfg }
}

fn pick(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

fn oracle_equivalence(models: &[&Desk]) -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut n, mut worst_obj, mut worst_fwd, mut errors) = (0, 0.0f64, 0.0f64, 0);
    for d in models {
        for i in pick(&mut rng, d.data.test.len(), 4) {
            let x = &d.data.test.x[i];
            for imp in IMPUTATIONS {
                let c = d.data.imputation(imp);
                for mode in MODES {
                    for budget in 0..=N_FLEX {
                        let spec = AttackSpec::availability(mode, budget, imp);
                        n += 1;
                        let (m, b) = match (
                            availability_milp(&d.clean, x, &spec, &c),
                            availability_bruteforce(&d.clean, x, &spec, &c),
                        ) {
                            (Ok(m), Ok(b)) => (m, b),
                            _ => {
                                errors += 1;
                                continue;
                            }
                        };
                        worst_obj = worst_obj.max((m.adversarial_forecast - b.adversarial_forecast).abs());
                        let mask: [bool; N_FLEX] = m.mask.clone().unwrap().try_into().unwrap();
                        let forward = d.clean.predict(&c.impute(x, &mask));
                        worst_fwd = worst_fwd.max((forward - m.adversarial_forecast).abs());
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    line(
        "1",
        "availability MILP equals enumeration",
        n >= 200 && errors == 0 && worst_obj <= 1e-6 && worst_fwd <= 1e-6 && secs < 120.0,
        format!(
            "{n} instances, {errors} solver errors, max objective gap {worst_obj:.1e}, max forward gap {worst_fwd:.1e} (tol 1e-6), {secs:.1} s (limit 120 s)"
        ),
    )
}

fn milp_dominates_pgd(d: &Desk) -> Line {
    let start = Instant::now();
    let samples = &d.data.test.x[..100];
    let mut ok = true;
    let mut parts = Vec::new();
    for eps in [0.05, 0.1, 0.2] {
        let (mut strict, mut violations, mut errors) = (0, 0, 0);
        for mode in MODES {
            let spec = AttackSpec::integrity(mode, eps);
            for x in samples {
                let (exact, local) = match (integrity_milp(&d.clean, x, &spec), integrity_pgd(&d.clean, x, &spec)) {
                    (Ok(e), Ok(l)) => (e.adversarial_forecast, l.adversarial_forecast),
                    _ => {
                        errors += 1;
                        continue;
                    }
                };
                let gain = match mode {
                    Mode::Max => exact - local,
                    Mode::Min => local - exact,
                };
                if gain < -1e-6 {
                    violations += 1;
                }
                if gain > 1e-6 {
                    strict += 1;
                }
            }
        }
        ok &= violations == 0 && errors == 0 && strict >= 1;
        parts.push(format!(
            "eps {eps}: {strict} strict wins, {violations} violations, {errors} errors"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    line(
        "2",
        "integrity MILP dominates PGD",
        ok,
        format!("100 samples x 2 modes; {}; {secs:.1} s (limit 300 s)", parts.join("; ")),
    )
}

fn ibp_soundness(models: &[&Desk]) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut checked, mut violations) = (0usize, 0usize);
    for d in models {
        let c = d.data.imputation(ImputationMode::Mean);
        let zero = d.data.imputation(ImputationMode::Zero);
        for kind in 0..2 {
            for k in 0..10_000 {
                let x = &d.data.test.x[k % d.data.test.len()];
                let (l0, u0) = match kind {
                    0 => init_bounds_availability(x, if k % 2 == 0 { &c } else { &zero }, DEFAULT_SLACK),
                    _ => init_bounds_integrity(x, 0.2),
                };
                let stack = propagate(&d.clean, &l0, &u0).expect("propagate");
                let z: Vec<f64> = l0
                    .iter()
                    .zip(&u0)
                    .map(|(&l, &u)| if u > l { rng.random_range(l..=u) } else { l })
                    .collect();
                let fwd = d.clean.forward(&z).unwrap();
                checked += 1;
                if !stack.contains(&z, &fwd.preactivations, 0.0) {
                    violations += 1;
                }
            }
        }
    }
    line(
        "3",
        "interval bounds contain every realised preactivation",
        violations == 0 && checked == models.len() * 2 * 10_000,
        format!(
            "{} models x 2 box types x 10^4 inputs = {checked} checks, {violations} violations",
            models.len()
        ),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

/// Smallest |preactivation| over a batch; points near a ReLU kink are
/// excluded from the finite-difference checks.
fn kink_distance(model: &Plnn, xs: &[Vec<f64>]) -> f64 {
    let hidden = model.layers().len() - 1;
    xs.iter()
        .flat_map(|x| {
            let f = model.forward(x).unwrap();
            f.preactivations[..hidden]
                .iter()
                .flatten()
                .map(|v| v.abs())
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn fd_params(model: &Plnn, loss: &dyn Fn(&Plnn) -> f64) -> Vec<f64> {
    let theta = flatten_params(model);
    let h = 1e-6;
    let mut m = model.clone();
    let mut out = Vec::with_capacity(theta.len());
    for k in 0..theta.len() {
        let mut t = theta.clone();
        t[k] = theta[k] + h;
        set_params(&mut m, &t);
        let up = loss(&m);
        t[k] = theta[k] - h;
        set_params(&mut m, &t);
        let down = loss(&m);
        out.push((up - down) / (2.0 * h));
    }
    out
}

fn random_batch(rng: &mut ChaCha8Rng, d: &Desk, size: usize, model: &Plnn) -> Vec<(Vec<f64>, f64)> {
    loop {
        let batch: Vec<(Vec<f64>, f64)> = (0..size)
            .map(|_| {
                let i = rng.random_range(0..d.data.train.len());
                (d.data.train.x[i].to_vec(), d.data.train.y[i])
            })
            .collect();
        let xs: Vec<Vec<f64>> = batch.iter().map(|(x, _)| x.clone()).collect();
        if kink_distance(model, &xs) > 1e-4 {
            return batch;
        }
    }
}

fn gradients(d: &Desk) -> Line {
    const TOL: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let model = &d.clean;
    let c = d.data.imputation(ImputationMode::Mean);
    let (mut wp, mut wi, mut wd) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let owned = random_batch(&mut rng, d, 8, model);
        let batch: Vec<Sample> = owned.iter().map(|(x, y)| (&x[..], *y)).collect();
        let g = grad_params(model, &batch).flatten();
        let fd = fd_params(model, &|m| mse_loss(m, &batch));
        wp = wp.max(rel_err(&g, &fd));

        let x = &owned[0].0;
        let gi = model.grad_input(x).unwrap();
        let h = 1e-6;
        let fdi: Vec<f64> = (0..x.len())
            .map(|j| {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[j] += h;
                b[j] -= h;
                (model.predict(&a) - model.predict(&b)) / (2.0 * h)
            })
            .collect();
        wi = wi.max(rel_err(&gi, &fdi));

        // masks frozen at random choices; the imputed points must also avoid kinks
        let masks = |rng: &mut ChaCha8Rng| -> Vec<Vec<bool>> {
            (0..batch.len())
                .map(|_| (0..N_FLEX).map(|_| rng.random_bool(0.5)).collect())
                .collect()
        };
        let imputed = |ms: &[Vec<bool>]| -> Vec<(Vec<f64>, f64)> {
            owned
                .iter()
                .zip(ms)
                .map(|((x, y), m)| {
                    let mut z = x.clone();
                    for j in 0..N_FLEX {
                        if !m[j] {
                            z[j] = c.values[j];
                        }
                    }
                    (z, *y)
                })
                .collect()
        };
        let (mmax, mmin, hi, lo) = loop {
            let (a, b) = (masks(&mut rng), masks(&mut rng));
            let (hi, lo) = (imputed(&a), imputed(&b));
            let pts: Vec<Vec<f64>> = hi.iter().chain(&lo).map(|(z, _)| z.clone()).collect();
            if kink_distance(model, &pts) > 1e-4 {
                break (a, b, hi, lo);
            }
        };
        let (wmax, wmin) = (1.0, 0.7);
        let gd = danskin_grad(model, &batch, &mmax, &mmin, &c, wmax, wmin).flatten();
        let hs: Vec<Sample> = hi.iter().map(|(x, y)| (&x[..], *y)).collect();
        let ls: Vec<Sample> = lo.iter().map(|(x, y)| (&x[..], *y)).collect();
        let fdd = fd_params(model, &|m| {
            mse_loss(m, &batch) + wmax * mse_loss(m, &hs) + wmin * mse_loss(m, &ls)
        });
        wd = wd.max(rel_err(&gd, &fdd));
    }
    line(
        "4",
        "analytic gradients match central differences",
        wp < TOL && wi < TOL && wd < TOL,
        format!("20 batches each; worst relative error params {wp:.1e}, input {wi:.1e}, danskin {wd:.1e} (tol 1e-5)"),
    )
}

fn budget_monotonicity(models: &[&Desk]) -> Line {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let (mut samples, mut breaks, mut errors) = (0, 0, 0);
    let mut med = vec![Vec::new(); N_FLEX + 1];
    for d in models {
        let c = d.data.imputation(ImputationMode::Mean);
        for i in pick(&mut rng, d.data.test.len(), 30) {
            let x = &d.data.test.x[i];
            let mut prev = f64::NEG_INFINITY;
            samples += 1;
            for budget in 0..=N_FLEX {
                let spec = AttackSpec::availability(Mode::Max, budget, ImputationMode::Mean);
                match availability_milp(&d.clean, x, &spec, &c) {
                    Ok(r) => {
                        if r.adversarial_forecast < prev {
                            breaks += 1;
                        }
                        prev = r.adversarial_forecast;
                        med[budget].push(r.mpe);
                    }
                    Err(_) => errors += 1,
                }
            }
        }
    }
    let medians: Vec<String> = med
        .iter_mut()
        .map(|v| {
            v.sort_by(f64::total_cmp);
            format!("{:.2}", v[v.len() / 2])
        })
        .collect();
    line(
        "5",
        "worst case nondecreasing in the budget",
        breaks == 0 && errors == 0,
        format!(
            "{samples} samples x budgets 0..6 (max, mean): {breaks} decreases, {errors} errors; median MPE by budget [{}] (plateau reported, not asserted)",
            medians.join(", ")
        ),
    )
}

fn median_abs(r: &BatchReport) -> f64 {
    r.summary.median_abs_mpe.unwrap_or(f64::NAN)
}

fn adversarial_training(d: &Desk) -> (Line, Line) {
    let start = Instant::now();
    let clean_mape = test_mape(&d.clean, &d.data);
    let (mut ok6, mut ok7) = (true, true);
    let (mut p6, mut p7) = (Vec::new(), Vec::new());
    for imp in IMPUTATIONS {
        let cfg = AdvTrainConfig {
            base: d.cfg.clone(),
            budget: 6,
            imputation: imp,
            weight_max: 1.0,
            weight_min: 1.0,
            ..AdvTrainConfig::desk()
        };
        let (adv, _) = advtrain(&d.init, &d.data.train, &d.data.test, &cfg).expect("advtrain");
        let c = d.data.imputation(imp);
        for mode in MODES {
            let spec = AttackSpec::availability(mode, 6, imp);
            let before = batch_attack(&d.clean, &d.data.test.x, &spec, &c, Solver::Milp, 1).expect("batch");
            let after = batch_attack(&adv, &d.data.test.x, &spec, &c, Solver::Milp, 1).expect("batch");
            let ratio = median_abs(&after) / median_abs(&before);
            ok6 &= ratio <= 0.7 && before.summary.n_failed == 0 && after.summary.n_failed == 0;
            p6.push(format!(
                "{spec} {:.3} -> {:.3} (x{ratio:.2})",
                median_abs(&before),
                median_abs(&after)
            ));
        }
        let adv_mape = test_mape(&adv, &d.data);
        ok7 &= adv_mape - clean_mape <= 3.0;
        p7.push(format!(
            "{}: {adv_mape:.3}% ({:+.3} pp)",
            imp.as_str(),
            adv_mape - clean_mape
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok6 &= secs < 900.0;
    (
        line(
            "6",
            "adversarial training cuts median |MPE| to <= 0.7x",
            ok6,
            format!("{}; {secs:.1} s (limit 900 s)", p6.join("; ")),
        ),
        line(
            "7",
            "clean test MAPE cost <= 3 pp",
            ok7,
            format!("clean {clean_mape:.3}%; hardened {}", p7.join(", ")),
        ),
    )
}

fn test_mape(model: &Plnn, data: &Prepared) -> f64 {
    let pred: Vec<f64> = data.test.x.iter().map(|x| model.predict(x)).collect();
    mape(&pred, &data.test.y).unwrap()
}

fn csv_without_timing(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&j| header[j] != "ms").collect();
    let mut rows = vec![keep.iter().map(|&j| header[j].clone()).collect()];
    for rec in r.records() {
        let rec = rec.unwrap();
        rows.push(keep.iter().map(|&j| rec[j].to_string()).collect());
    }
    rows
}

fn parallel_batches(d: &Desk) -> (Line, Option<String>) {
    let dir = tempfile::tempdir().unwrap();
    let c = d.data.imputation(ImputationMode::Mean);
    let inputs: Vec<Features> = d.data.test.x.iter().take(200).copied().collect();
    let mut times = [0.0; 2];
    let mut identical = true;
    for budget in 1..=N_FLEX {
        let spec = AttackSpec::availability(Mode::Max, budget, ImputationMode::Mean);
        let mut tables = Vec::new();
        for (k, workers) in [1, 8].into_iter().enumerate() {
            let r = batch_attack(&d.clean, &inputs, &spec, &c, Solver::Milp, workers).expect("batch");
            times[k] += r.elapsed;
            let p = dir.path().join(format!("b{budget}_w{workers}.csv"));
            write_results_csv(&p, &r).unwrap();
            tables.push(csv_without_timing(&p));
        }
        identical &= tables[0] == tables[1];
    }
    let speedup = times[0] / times[1];
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let warn = (speedup < 3.0)
        .then(|| format!("speedup {speedup:.2}x < 3x with {cores} available core(s); soft gate, not failing"));
    (
        line(
            "8",
            "parallel batches are deterministic",
            identical,
            format!(
                "200 samples x budgets 1..6: 1 worker {:.2} s, 8 workers {:.2} s, speedup {speedup:.2}x on {cores} core(s); CSVs identical apart from timing: {identical}",
                times[0], times[1]
            ),
        ),
        warn,
    )
}

fn reduction_identity(d: &Desk) -> Line {
    let base = TrainConfig {
        epochs: 10,
        ..d.cfg.clone()
    };
    let cfg = AdvTrainConfig {
        base: base.clone(),
        weight_max: 0.0,
        weight_min: 0.0,
        workers: 2,
        ..AdvTrainConfig::desk()
    };
    let mut adv = Vec::new();
    advtrain_observed(&d.init, &d.data.train, &d.data.test, &cfg, &mut |_, m| {
        adv.push(flatten_params(m))
    })
    .expect("advtrain");
    let mut clean = Vec::new();
    train_observed(&d.init, &d.data.train, &d.data.test, &base, &mut |_, m| {
        clean.push(flatten_params(m))
    })
    .expect("train");
    let same = adv.len() == clean.len()
        && adv
            .iter()
            .zip(&clean)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    line(
        "9",
        "zero-weight adversarial training is clean training",
        same,
        format!(
            "{} epochs x {} parameters compared bit for bit",
            clean.len(),
            adv.first().map_or(0, Vec::len)
        ),
    )
}

fn real_dataset() -> Line {
    let Some(csv) = std::env::var_os("LOADGUARD_REAL_CSV") else {
        return Line {
            id: "10",
            name: "full-size clean MAPE near 6.07%",
            verdict: Verdict::Skip,
            detail: "LOADGUARD_REAL_CSV not set".into(),
        };
    };
    let schema = match std::env::var_os("LOADGUARD_REAL_SCHEMA") {
        Some(p) => toml::from_str::<CsvSchema>(&std::fs::read_to_string(p).unwrap()).unwrap(),
        None => CsvSchema::default(),
    };
    let records = load_csv(Path::new(&csv), &schema).expect("load CSV");
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed: 0,
            source: "real".into(),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&[12, 40, 20, 10, 1], 0).unwrap();
    let (model, _) = train(&init, &data.train, &data.test, &TrainConfig::full()).expect("train");
    let m = test_mape(&model, &data);
    let ok = (m - 6.07).abs() <= 2.0;
    Line {
        id: "10",
        name: "full-size clean MAPE near 6.07%",
        verdict: if ok { Verdict::Pass } else { Verdict::Warn },
        detail: format!(
            "test MAPE {m:.3}% vs 6.07% ({:+.3} pp, tol 2 pp); {} train / {} test rows, {} outliers removed",
            m - 6.07,
            data.manifest.n_train,
            data.manifest.n_test,
            data.manifest.outliers_removed
        ),
    }
}

fn main() {
    // `cargo test` passes harness flags such as --list; there is nothing to list
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let a = desk(1);
    let b = desk(2);
    let c = desk(3);
    assert_eq!(a.data.train.x[0].len(), N_FEATURES);

    let mut lines = vec![
        oracle_equivalence(&[&a, &b]),
        milp_dominates_pgd(&a),
        ibp_soundness(&[&a, &b, &c]),
        gradients(&a),
        budget_monotonicity(&[&a, &b]),
    ];
    let (six, seven) = adversarial_training(&a);
    lines.push(six);
    lines.push(seven);
    let (eight, warn) = parallel_batches(&a);
    lines.push(eight);
    lines.push(reduction_identity(&a));
    lines.push(real_dataset());

    println!();
    for l in &lines {
        let tag = match l.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Warn => "WARN",
            Verdict::Skip => "SKIP",
        };
        println!("[{tag}] criterion {:>2} {}: {}", l.id, l.name, l.detail);
    }
    if let Some(w) = warn {
        println!("[WARN] criterion  8 speedup: {w}");
    }
    let failed = lines.iter().filter(|l| l.verdict == Verdict::Fail).count();
    println!(
        "acceptance: {} criteria, {failed} failed, {:.1} s",
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
