use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::{
    parse_budgets, AdvTrainArgs, AttackArgs, Cli, CliError, Command, PrepareArgs, Preset, ReportArgs, RunConfig,
    TrainArgs, OUT_ENV,
};
use crate::advtrain::{advtrain, write_advtrain_history_csv, AdvTrainConfig};
use crate::attacks::{
    availability_bruteforce, batch_attack, read_results_csv, read_summary_csv, write_results_csv, write_summary_csv,
    AttackSpec, BatchReport, BatchSummary, Mode, Solver, VERIFY_TOL,
};
use crate::dataset::{
    load_csv, prepare, synth_records, CsvSchema, DatasetError, ImputationMode, PrepareConfig, Prepared, SynthConfig,
};
use crate::metrics::{box_stats, mape, BoxStats};
use crate::network::{self, train, write_history_csv, NetworkError, Plnn, TrainConfig};
use crate::report::{box_plot_svg, histogram_svg, text_table};

type Result<T> = std::result::Result<T, CliError>;

const DEFAULT_RATIO: f64 = 0.8;

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
    workers: usize,
}

impl Ctx {
    fn data_dir(&self) -> PathBuf {
        self.out.join("data")
    }

    fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }
}

pub(super) fn dispatch(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::read(p).map_err(CliError::input)?,
        None => RunConfig::default(),
    };
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let workers = cli.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::input("--workers must be at least 1"));
    }
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        cfg,
        out,
        workers,
    };
    match cli.command {
        Command::Prepare(a) => cmd_prepare(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Advtrain(a) => cmd_advtrain(&ctx, a),
        Command::Attack(a) => cmd_attack(&ctx, a),
        Command::Report(a) => cmd_report(&ctx, a),
    }
}

fn dataset_err(e: DatasetError) -> CliError {
    CliError::input(e.to_string())
}

fn network_err(e: NetworkError) -> CliError {
    match e {
        NetworkError::NonfiniteLoss { .. } | NetworkError::Objective(_) => CliError::training(e.to_string()),
        _ => CliError::input(e.to_string()),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

fn cmd_prepare(ctx: &Ctx, a: PrepareArgs) -> Result<()> {
    let sec = &ctx.cfg.prepare;
    let (csv, synthetic) = match (a.csv, a.synthetic) {
        (None, None) => (sec.csv.clone(), sec.synthetic),
        flags => flags,
    };
    let (records, source) = match (csv, synthetic) {
        (Some(path), None) => {
            let schema = match &a.schema {
                Some(p) => {
                    let text =
                        std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                    toml::from_str::<CsvSchema>(&text).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
                }
                None => sec.schema.clone().unwrap_or_default(),
            };
            let records = load_csv(&path, &schema).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            (records, format!("csv:{}", path.display()))
        }
        (None, Some(n)) => (
            synth_records(&SynthConfig::new(n, ctx.seed)),
            format!("synthetic:{n}:{}", ctx.seed),
        ),
        (Some(_), Some(_)) => return Err(CliError::input("give either a CSV or --synthetic, not both")),
        (None, None) => return Err(CliError::input("nothing to prepare: pass --csv PATH or --synthetic N")),
    };
    let ratio = a.ratio.or(sec.ratio).unwrap_or(DEFAULT_RATIO);
    let prepared = prepare(
        &records,
        &PrepareConfig {
            ratio,
            seed: ctx.seed,
            source,
        },
    )
    .map_err(dataset_err)?;
    let dir = a
        .dataset
        .or_else(|| sec.dataset.clone())
        .unwrap_or_else(|| ctx.data_dir());
    prepared.write(&dir).map_err(dataset_err)?;
    let m = &prepared.manifest;
    println!(
        "rows: {} read, {} outliers removed, {} train, {} test",
        m.n_raw, m.outliers_removed, m.n_train, m.n_test
    );
    println!("dataset: {} (manifest {})", dir.display(), &m.hash()[..12]);
    Ok(())
}

fn read_dataset(dir: &Path) -> Result<Prepared> {
    Prepared::read(dir).map_err(|e| CliError::input(format!("cannot read prepared dataset in {}: {e}", dir.display())))
}

struct TrainSetup {
    prepared: Prepared,
    dims: Vec<usize>,
    cfg: TrainConfig,
}

fn train_setup(ctx: &Ctx, a: &TrainArgs) -> Result<TrainSetup> {
    let sec = &ctx.cfg.train;
    let preset = a.preset.or(sec.preset).unwrap_or(Preset::Full);
    let (dims, mut cfg) = match preset {
        Preset::Full => (vec![12, 40, 20, 10, 1], TrainConfig::full()),
        Preset::Desk => (vec![12, 16, 8, 1], TrainConfig::desk()),
    };
    let dims = a.dims.clone().or_else(|| sec.dims.clone()).unwrap_or(dims);
    if dims.len() < 2 || dims[0] != crate::dataset::N_FEATURES || *dims.last().unwrap() != 1 {
        return Err(CliError::input(format!(
            "dims {dims:?} must start at {} inputs and end in one output",
            crate::dataset::N_FEATURES
        )));
    }
    if let Some(e) = a.epochs.or(sec.epochs) {
        cfg.epochs = e;
    }
    if let Some(b) = a.batch_size.or(sec.batch_size) {
        cfg.batch_size = b;
    }
    if let Some(lr) = a.lr.or(sec.lr0) {
        cfg.lr0 = lr;
    }
    cfg.seed = ctx.seed;
    cfg.validate().map_err(network_err)?;
    let dir = a
        .dataset
        .clone()
        .or_else(|| sec.dataset.clone())
        .unwrap_or_else(|| ctx.data_dir());
    Ok(TrainSetup {
        prepared: read_dataset(&dir)?,
        dims,
        cfg,
    })
}

fn finish_training(
    mut model: Plnn,
    history: &network::History,
    prepared: &Prepared,
    model_path: &Path,
    history_path: &Path,
    write_history: impl Fn(&network::History, &Path) -> std::result::Result<(), NetworkError>,
) -> Result<()> {
    model.trained_on = Some(prepared.manifest.hash());
    create_parent(model_path)?;
    create_parent(history_path)?;
    network::save(&model, model_path).map_err(network_err)?;
    write_history(history, history_path).map_err(network_err)?;
    let best = &history.epochs[history.best_epoch];
    println!(
        "best epoch {} of {}: test MAPE {:.3}%",
        history.best_epoch + 1,
        history.epochs.len(),
        best.test_mape
    );
    println!("model: {}", model_path.display());
    println!("history: {}", history_path.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let s = train_setup(ctx, &a)?;
    let init = Plnn::init(&s.dims, ctx.seed).map_err(network_err)?;
    let (model, history) = train(&init, &s.prepared.train, &s.prepared.test, &s.cfg).map_err(network_err)?;
    let sec = &ctx.cfg.train;
    let model_path = a
        .model
        .or_else(|| sec.model.clone())
        .unwrap_or_else(|| ctx.models_dir().join("clean.json"));
    let history_path = a
        .history
        .or_else(|| sec.history.clone())
        .unwrap_or_else(|| model_path.with_extension("history.csv"));
    finish_training(
        model,
        &history,
        &s.prepared,
        &model_path,
        &history_path,
        write_history_csv,
    )
}

fn cmd_advtrain(ctx: &Ctx, a: AdvTrainArgs) -> Result<()> {
    let s = train_setup(ctx, &a.train)?;
    let sec = &ctx.cfg.advtrain;
    let defaults = AdvTrainConfig::default();
    let cfg = AdvTrainConfig {
        base: s.cfg.clone(),
        budget: a.budget.or(sec.budget).unwrap_or(defaults.budget),
        imputation: a.impute.or(sec.imputation).unwrap_or(defaults.imputation),
        weight_max: a.bmax.or(sec.weight_max).unwrap_or(defaults.weight_max),
        weight_min: a.bmin.or(sec.weight_min).unwrap_or(defaults.weight_min),
        inner_solver: a.inner_solver.or(sec.inner_solver).unwrap_or(defaults.inner_solver),
        inner_objective: a
            .inner_objective
            .or(sec.inner_objective)
            .unwrap_or(defaults.inner_objective),
        workers: ctx.workers,
    };
    cfg.validate().map_err(network_err)?;
    let init = Plnn::init(&s.dims, ctx.seed).map_err(network_err)?;
    let (model, history) = advtrain(&init, &s.prepared.train, &s.prepared.test, &cfg).map_err(network_err)?;
    let model_path = a
        .train
        .model
        .or_else(|| sec.model.clone())
        .unwrap_or_else(|| ctx.models_dir().join(format!("adv_{}.json", cfg.imputation.as_str())));
    let history_path = a
        .train
        .history
        .or_else(|| sec.history.clone())
        .unwrap_or_else(|| model_path.with_extension("history.csv"));
    finish_training(
        model,
        &history,
        &s.prepared,
        &model_path,
        &history_path,
        write_advtrain_history_csv,
    )
}

enum Kind {
    Integrity,
    Availability,
}

fn grid_specs(ctx: &Ctx, a: &AttackArgs) -> Result<(Kind, Vec<AttackSpec>, Option<ImputationMode>)> {
    let sec = &ctx.cfg.attack;
    let kind = match a.kind.as_deref().or(sec.kind.as_deref()) {
        Some("integrity") => Kind::Integrity,
        Some("availability") => Kind::Availability,
        Some(other) => {
            return Err(CliError::input(format!(
                "unknown attack kind {other:?} (expected integrity or availability)"
            )))
        }
        None => return Err(CliError::input("--kind integrity|availability is required")),
    };
    let mode = a.mode.or(sec.mode).unwrap_or(Mode::Max);
    match kind {
        Kind::Availability => {
            let imp = a.impute.or(sec.imputation).unwrap_or(ImputationMode::Mean);
            let betas = match &a.beta {
                Some(s) => parse_budgets(s).map_err(CliError::input)?,
                None => sec.beta.clone().unwrap_or_else(|| vec![6]),
            };
            let specs = betas
                .into_iter()
                .map(|b| AttackSpec::availability(mode, b, imp))
                .collect();
            Ok((kind, specs, Some(imp)))
        }
        Kind::Integrity => {
            let mut pgd = sec.pgd.unwrap_or_default();
            if let Some(s) = a.pgd_steps {
                pgd.steps = s;
            }
            if let Some(r) = a.pgd_restarts {
                pgd.restarts = r;
            }
            if a.pgd_step_size.is_some() {
                pgd.step_size = a.pgd_step_size;
            }
            pgd.seed = ctx.seed;
            let eps = a
                .eps
                .clone()
                .or_else(|| sec.eps.clone())
                .unwrap_or_else(|| vec![0.05, 0.1, 0.2]);
            let specs = eps
                .into_iter()
                .map(|eps| AttackSpec::Integrity { mode, eps, pgd })
                .collect();
            Ok((kind, specs, None))
        }
    }
}

fn cell_suffix(spec: &AttackSpec) -> String {
    match spec {
        AttackSpec::Availability { budget, .. } => format!("b{budget}"),
        AttackSpec::Integrity { eps, .. } => format!("e{eps}"),
    }
}

/// Re-solves every successful availability sample by enumeration.
fn oracle_check(
    model: &Plnn,
    inputs: &[[f64; 12]],
    report: &BatchReport,
    c: &crate::dataset::ImputationVector,
) -> Result<usize> {
    let mut mismatches = 0;
    for (i, r) in report.successes() {
        let oracle = availability_bruteforce(model, &inputs[i], &report.spec, c)
            .map_err(|e| CliError::verify(format!("oracle failed on sample {i}: {e}")))?;
        let gap = (oracle.adversarial_forecast - r.adversarial_forecast).abs();
        if gap > VERIFY_TOL {
            eprintln!(
                "{}: sample {i}: solver {} vs enumeration {} (gap {gap:.3e})",
                report.spec, r.adversarial_forecast, oracle.adversarial_forecast
            );
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

fn cmd_attack(ctx: &Ctx, a: AttackArgs) -> Result<()> {
    let sec = &ctx.cfg.attack;
    let (kind, specs, imp) = grid_specs(ctx, &a)?;
    let solver = a.solver.or(sec.solver).unwrap_or(Solver::Milp);
    let check = a.oracle_check || sec.oracle_check.unwrap_or(false);
    if check && matches!(kind, Kind::Integrity) {
        return Err(CliError::input("--oracle-check applies to availability attacks only"));
    }
    let model_path = a
        .model
        .clone()
        .or_else(|| sec.model.clone())
        .unwrap_or_else(|| ctx.models_dir().join("clean.json"));
    let model = network::load(&model_path).map_err(|e| CliError::input(format!("{}: {e}", model_path.display())))?;
    let data_dir = a
        .dataset
        .clone()
        .or_else(|| sec.dataset.clone())
        .unwrap_or_else(|| ctx.data_dir());
    let prepared = read_dataset(&data_dir)?;
    let hash = prepared.manifest.hash();
    match &model.trained_on {
        Some(h) if *h != hash => {
            return Err(CliError::input(format!(
                "{} was trained on dataset {} but {} has manifest {}",
                model_path.display(),
                &h[..h.len().min(12)],
                data_dir.display(),
                &hash[..12]
            )))
        }
        Some(_) => {}
        None => log::warn!(
            "{} records no training dataset; skipping the manifest check",
            model_path.display()
        ),
    }
    let n = a
        .samples
        .or(sec.samples)
        .unwrap_or(prepared.test.len())
        .min(prepared.test.len());
    let inputs = &prepared.test.x[..n];
    let c = prepared.imputation(imp.unwrap_or(ImputationMode::Zero));

    let results_dir = a
        .results
        .clone()
        .or_else(|| sec.results.clone())
        .unwrap_or_else(|| ctx.results_dir());
    std::fs::create_dir_all(&results_dir).map_err(|e| CliError::input(format!("{}: {e}", results_dir.display())))?;
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let mode = specs[0].mode();
    let prefix = match imp {
        Some(i) => format!("{stem}_{}_{mode}_{}", specs[0].kind(), i.as_str()),
        None => format!("{stem}_{}_{mode}", specs[0].kind()),
    };

    let mut summaries: Vec<BatchSummary> = Vec::new();
    let mut failed = 0;
    let mut total = 0;
    let mut mismatches = 0;
    for spec in &specs {
        let report =
            batch_attack(&model, inputs, spec, &c, solver, ctx.workers).map_err(|e| CliError::input(e.to_string()))?;
        let file = format!("{prefix}_{}.csv", cell_suffix(spec));
        write_results_csv(&results_dir.join(&file), &report)
            .map_err(|e| CliError::input(format!("{}: {e}", results_dir.join(&file).display())))?;
        if check {
            mismatches += oracle_check(&model, inputs, &report, &c)?;
        }
        let mut summary = report.summary.clone();
        summary.results_file = file;
        println!(
            "{spec}: n {} failed {} median MPE {} median |MPE| {} ({:.2} ms/sample)",
            summary.n,
            summary.n_failed,
            fmt_opt(summary.mpe_median),
            fmt_opt(summary.median_abs_mpe),
            summary.mean_ms
        );
        if summary.n_failed > 0 {
            eprintln!("{spec}: failed samples {}", summary.failures);
        }
        failed += summary.n_failed;
        total += summary.n;
        summaries.push(summary);
    }
    let summary_path = results_dir.join(format!("{prefix}_summary.csv"));
    write_summary_csv(&summary_path, &summaries)
        .map_err(|e| CliError::input(format!("{}: {e}", summary_path.display())))?;
    println!("summary: {}", summary_path.display());
    if mismatches > 0 {
        return Err(CliError::verify(format!(
            "{mismatches} samples disagree with enumeration"
        )));
    }
    if check {
        println!("oracle check: all {} solved samples match enumeration", total - failed);
    }
    if total > 0 && failed as f64 >= 0.01 * total as f64 {
        return Err(CliError::verify(format!("{failed} of {total} samples failed")));
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn parse_model_arg(s: &str) -> Result<(String, PathBuf)> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(CliError::input(format!("--model expects NAME=PATH, got {s:?}"))),
    }
}

fn cell_label(s: &BatchSummary) -> String {
    match (s.beta, s.eps) {
        (Some(b), _) => format!("beta={b}"),
        (None, Some(e)) => format!("eps={e}"),
        _ => "?".to_string(),
    }
}

fn cmd_report(ctx: &Ctx, a: ReportArgs) -> Result<()> {
    let sec = &ctx.cfg.report;
    let results_dir = a
        .results
        .or_else(|| sec.results.clone())
        .unwrap_or_else(|| ctx.results_dir());
    let mut summary_files: Vec<PathBuf> = match std::fs::read_dir(&results_dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with("_summary.csv"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    summary_files.sort();
    if summary_files.is_empty() {
        return Err(CliError::input(format!(
            "no results found in {}",
            results_dir.display()
        )));
    }
    let report_dir = a
        .report_dir
        .or_else(|| sec.out.clone())
        .unwrap_or_else(|| ctx.out.join("report"));
    std::fs::create_dir_all(&report_dir).map_err(|e| CliError::input(format!("{}: {e}", report_dir.display())))?;

    let mut table = vec![[
        "grid",
        "cell",
        "solver",
        "n",
        "failed",
        "median MPE",
        "q1",
        "q3",
        "min",
        "max",
        "median |MPE|",
    ]
    .map(String::from)
    .to_vec()];
    for path in &summary_files {
        let rows = read_summary_csv(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let grid = name.trim_end_matches("_summary.csv").to_string();
        let mut boxes: Vec<(String, BoxStats)> = Vec::new();
        let mut hist: Vec<(String, Vec<usize>)> = Vec::new();
        for s in &rows {
            let label = cell_label(s);
            let rpath = results_dir.join(&s.results_file);
            let cells = read_results_csv(&rpath).map_err(|e| CliError::input(format!("{}: {e}", rpath.display())))?;
            let mpes: Vec<f64> = cells.iter().map(|r| r.mpe_percent).collect();
            if let Ok(b) = box_stats(&mpes) {
                boxes.push((label.clone(), b));
            }
            if s.kind == "availability" {
                let mut counts = vec![0usize; crate::dataset::N_FLEX + 1];
                for r in &cells {
                    if let Some(m) = r.missing_count {
                        counts[m.min(crate::dataset::N_FLEX)] += 1;
                    }
                }
                hist.push((label.clone(), counts));
            }
            table.push(vec![
                grid.clone(),
                label,
                s.solver.as_str().to_string(),
                s.n.to_string(),
                s.n_failed.to_string(),
                fmt_opt(s.mpe_median),
                fmt_opt(s.mpe_q1),
                fmt_opt(s.mpe_q3),
                fmt_opt(s.mpe_min),
                fmt_opt(s.mpe_max),
                fmt_opt(s.median_abs_mpe),
            ]);
        }
        let x_label = if hist.is_empty() { "radius" } else { "budget" };
        let svg = box_plot_svg(&grid, x_label, "MPE (%)", &boxes);
        write_text(&report_dir.join(format!("{grid}_box.svg")), &svg)?;
        if !hist.is_empty() {
            let svg = histogram_svg(&format!("{grid}: blocked features"), "blocked features", &hist);
            write_text(&report_dir.join(format!("{grid}_missing.svg")), &svg)?;
        }
    }
    write_text(&report_dir.join("summary.txt"), &text_table(&table))?;

    let mut models: BTreeMap<String, PathBuf> = sec.models.clone().unwrap_or_default();
    for m in &a.models {
        let (name, path) = parse_model_arg(m)?;
        models.insert(name, path);
    }
    if !models.is_empty() {
        let dir = a
            .dataset
            .or_else(|| sec.dataset.clone())
            .unwrap_or_else(|| ctx.data_dir());
        let prepared = read_dataset(&dir)?;
        let mut rows = vec![vec![
            "model".to_string(),
            "train MAPE (%)".into(),
            "test MAPE (%)".into(),
        ]];
        for (name, path) in &models {
            let model = network::load(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let score = |d: &crate::dataset::Dataset| -> Result<String> {
                let pred: Vec<f64> = d.x.iter().map(|x| model.predict(x)).collect();
                mape(&pred, &d.y)
                    .map(|m| format!("{m:.3}"))
                    .map_err(|e| CliError::input(e.to_string()))
            };
            rows.push(vec![name.clone(), score(&prepared.train)?, score(&prepared.test)?]);
        }
        let text = text_table(&rows);
        print!("{text}");
        write_text(&report_dir.join("mape_table.txt"), &text)?;
    }
    println!("report: {} ({} grids)", report_dir.display(), summary_files.len());
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}
