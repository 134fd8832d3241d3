//! Generate a synthetic hourly load series, then clean, split and scale it.
//!
//!     cargo run --example prepare_data -- [rows] [seed]

use loadguard::dataset::{prepare, synth_records, ImputationMode, PrepareConfig, Prepared, SynthConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(2000, |s| s.parse().expect("rows"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let records = synth_records(&SynthConfig::new(n, seed));
    let prepared = prepare(
        &records,
        &PrepareConfig {
            ratio: 0.8,
            seed,
            source: format!("synthetic:{n}:{seed}"),
        },
    )
    .expect("prepare");
    let m = &prepared.manifest;
    println!(
        "{} rows, {} outliers removed, {} train / {} test",
        m.n_raw, m.outliers_removed, m.n_train, m.n_test
    );
    println!("scale min {:?}", m.scale_min);
    println!("scale max {:?}", m.scale_max);
    for mode in [ImputationMode::Zero, ImputationMode::Mean] {
        println!(
            "imputation {:>4}: {:?}",
            mode.as_str(),
            &prepared.imputation(mode).values[..6]
        );
    }

    let dir = std::env::temp_dir().join(format!("loadguard-prepare-{seed}"));
    prepared.write(&dir).expect("write");
    let back = Prepared::read(&dir).expect("read back");
    assert_eq!(back, prepared);
    println!("written to {} (manifest {})", dir.display(), &m.hash()[..12]);
}
