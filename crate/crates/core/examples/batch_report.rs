//! Attack a whole test set in parallel, write the result tables and render a
//! box plot of the per-sample MPE against the budget.
//!
//!     cargo run --release --example batch_report -- [workers]

use loadguard::attacks::{batch_attack, write_results_csv, write_summary_csv, AttackSpec, Mode, Solver};
use loadguard::dataset::{prepare, synth_records, ImputationMode, PrepareConfig, SynthConfig};
use loadguard::metrics::box_stats;
use loadguard::network::{train, Plnn, TrainConfig};
use loadguard::report::{box_plot_svg, text_table};

fn main() {
    let workers: usize = std::env::args().nth(1).map_or(2, |s| s.parse().expect("workers"));
    let records = synth_records(&SynthConfig::new(2000, 3));
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed: 3,
            source: "synthetic".into(),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&[12, 16, 8, 1], 3).expect("init");
    let (model, _) = train(&init, &data.train, &data.test, &TrainConfig::desk()).expect("train");
    let c = data.imputation(ImputationMode::Zero);

    let dir = std::env::temp_dir().join("loadguard-batch");
    std::fs::create_dir_all(&dir).expect("mkdir");
    let mut summaries = Vec::new();
    let mut boxes = Vec::new();
    let mut rows = vec![vec!["cell".to_string(), "median MPE".into(), "ms/sample".into()]];
    for budget in 1..=6 {
        let spec = AttackSpec::availability(Mode::Max, budget, ImputationMode::Zero);
        let report = batch_attack(&model, &data.test.x[..200], &spec, &c, Solver::Milp, workers).expect("batch");
        let file = format!("max_zero_b{budget}.csv");
        write_results_csv(&dir.join(&file), &report).expect("results csv");
        let mut s = report.summary.clone();
        s.results_file = file;
        rows.push(vec![
            spec.to_string(),
            format!("{:.3}", s.mpe_median.unwrap_or(f64::NAN)),
            format!("{:.2}", s.mean_ms),
        ]);
        summaries.push(s);
        boxes.push((format!("{budget}"), box_stats(&report.mpes()).expect("stats")));
    }
    write_summary_csv(&dir.join("max_zero_summary.csv"), &summaries).expect("summary csv");
    std::fs::write(
        dir.join("max_zero_box.svg"),
        box_plot_svg("AVAI(max, zero)", "budget", "MPE (%)", &boxes),
    )
    .expect("svg");
    print!("{}", text_table(&rows));
    println!("tables and plot in {}", dir.display());
}
