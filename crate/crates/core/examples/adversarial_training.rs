//! Harden a forecaster against availability attacks and compare it with the
//! clean model.
//!
//!     cargo run --release --example adversarial_training

use loadguard::advtrain::{adversarial_test_mpe, advtrain, AdvTrainConfig};
use loadguard::dataset::{prepare, synth_records, ImputationMode, PrepareConfig, SynthConfig};
use loadguard::network::{train, Plnn, TrainConfig};

fn main() {
    let seed = 1;
    let records = synth_records(&SynthConfig::new(2000, seed));
    let data = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed,
            source: "synthetic".into(),
        },
    )
    .expect("prepare");
    let init = Plnn::init(&[12, 16, 8, 1], seed).expect("init");
    let base = TrainConfig {
        seed,
        ..TrainConfig::desk()
    };
    let (clean, h) = train(&init, &data.train, &data.test, &base).expect("train");
    println!("clean model: test MAPE {:.3}%", h.epochs[h.best_epoch].test_mape);

    for imputation in [ImputationMode::Zero, ImputationMode::Mean] {
        let c = data.imputation(imputation);
        let cfg = AdvTrainConfig {
            base: base.clone(),
            imputation,
            ..AdvTrainConfig::desk()
        };
        let (adv, ah) = advtrain(&init, &data.train, &data.test, &cfg).expect("advtrain");
        let (cmax, cmin) = adversarial_test_mpe(&clean, &data.test, &c, 6, None).expect("clean eval");
        let (amax, amin) = adversarial_test_mpe(&adv, &data.test, &c, 6, None).expect("adv eval");
        println!("imputation {}:", imputation.as_str());
        println!("  test MAPE       {:.3}%", ah.epochs[ah.best_epoch].test_mape);
        println!(
            "  median |MPE| max  clean {cmax:.3}  hardened {amax:.3}  ratio {:.2}",
            amax / cmax
        );
        println!(
            "  median |MPE| min  clean {cmin:.3}  hardened {amin:.3}  ratio {:.2}",
            amin / cmin
        );
    }
}
