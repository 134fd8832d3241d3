//! Integrity attacks: bounded perturbation of the weather features. The MILP
//! finds the global optimum; PGD only a local one.
//!
//!     cargo run --release --example integrity_vs_pgd

use loadguard::attacks::{integrity_milp, integrity_pgd, AttackSpec, Mode};
use loadguard::dataset::{prepare, synth_records, PrepareConfig, SynthConfig};
use loadguard::network::{train, Plnn, TrainConfig};

fn main() {
    let records = synth_records(&SynthConfig::new(2000, 2));
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed: 2,
            source: "synthetic".into(),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&[12, 16, 8, 1], 2).expect("init");
    let (model, _) = train(&init, &data.train, &data.test, &TrainConfig::desk()).expect("train");

    let samples = &data.test.x[..50];
    for eps in [0.05, 0.1, 0.2] {
        for mode in [Mode::Max, Mode::Min] {
            let spec = AttackSpec::integrity(mode, eps);
            let (mut gain, mut strict) = (0.0, 0);
            for x in samples {
                let exact = integrity_milp(&model, x, &spec).expect("milp");
                let local = integrity_pgd(&model, x, &spec).expect("pgd");
                let d = match mode {
                    Mode::Max => exact.mpe - local.mpe,
                    Mode::Min => local.mpe - exact.mpe,
                };
                assert!(d > -1e-4, "PGD beat the global optimum");
                gain += d;
                strict += (d > 1e-6) as usize;
            }
            println!(
                "{spec}: MILP better on {strict}/{} samples, mean MPE gap {:.4} pp",
                samples.len(),
                gain / samples.len() as f64
            );
        }
    }
}
