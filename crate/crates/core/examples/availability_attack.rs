//! Exact availability attacks: block up to β weather features and let the
//! operator impute them. The MILP answer is checked against enumerating
//! every mask.
//!
//!     cargo run --release --example availability_attack

use loadguard::attacks::{availability_bruteforce, availability_milp, mask_bits, AttackSpec, Mode};
use loadguard::dataset::{prepare, synth_records, ImputationMode, PrepareConfig, SynthConfig};
use loadguard::network::{train, Plnn, TrainConfig};

fn main() {
    let records = synth_records(&SynthConfig::new(2000, 1));
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed: 1,
            source: "synthetic".into(),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&[12, 16, 8, 1], 1).expect("init");
    let (model, _) = train(&init, &data.train, &data.test, &TrainConfig::desk()).expect("train");

    let c = data.imputation(ImputationMode::Mean);
    let x = &data.test.x[0];
    println!("clean forecast {:.4}", model.predict(x));
    for mode in [Mode::Max, Mode::Min] {
        for budget in 0..=6 {
            let spec = AttackSpec::availability(mode, budget, ImputationMode::Mean);
            let milp = availability_milp(&model, x, &spec, &c).expect("milp");
            let brute = availability_bruteforce(&model, x, &spec, &c).expect("enumeration");
            assert!((milp.adversarial_forecast - brute.adversarial_forecast).abs() < 1e-6);
            println!(
                "{spec}: forecast {:.4}  MPE {:+.3}%  mask {}  ({} nodes)",
                milp.adversarial_forecast,
                milp.mpe,
                mask_bits(milp.mask.as_deref().unwrap_or_default()),
                milp.stats.nodes
            );
        }
    }
}
