//! Train the small 12-16-8-1 forecaster and save it as JSON.
//!
//!     cargo run --release --example train_forecaster

use loadguard::dataset::{prepare, synth_records, PrepareConfig, SynthConfig};
use loadguard::network::{load, save, train, Plnn, TrainConfig};

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
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::desk()
    };
    println!("{} parameters, {} epochs, lr {}", init.n_params(), cfg.epochs, cfg.lr0);
    let (mut model, history) = train(&init, &data.train, &data.test, &cfg).expect("train");
    for r in history.epochs.iter().step_by(10) {
        println!(
            "epoch {:>3}  train mse {:.5}  test MAPE {:.3}%",
            r.epoch, r.train_mse, r.test_mape
        );
    }
    let best = &history.epochs[history.best_epoch];
    println!("kept epoch {} (test MAPE {:.3}%)", best.epoch, best.test_mape);

    model.trained_on = Some(data.manifest.hash());
    let path = std::env::temp_dir().join("loadguard-clean.json");
    save(&model, &path).expect("save");
    assert_eq!(load(&path).expect("load"), model);
    println!("saved {}", path.display());
}
