//! Load a KDD-format file (or generate a synthetic one), count categories, and
//! take a seeded stratified subsample and 80/20 split.
//!
//!     cargo run --release --example ingest_split -- [path/to/kddcup.data_10_percent[.gz]]

use std::error::Error;

use iot_anomaly::kdd::{load_dataset, split_train_test, stratified_subsample, Dataset, SplitSpec};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn show(name: &str, ds: &Dataset) {
    let counts: Vec<String> = ds.category_counts().iter().map(|(c, n)| format!("{}={n}", c.name())).collect();
    println!("{name:<10} {:>7} rows  {}", ds.len(), counts.join(" "));
}

fn main() -> Result<(), Box<dyn Error>> {
    let ds = match std::env::args().nth(1) {
        Some(path) => load_dataset(path)?,
        None => generate_dataset(&SynthConfig::new(50_000, 1))?,
    };
    println!("source {} (sha256 {})", ds.source_path, &ds.checksum[..16]);
    show("full", &ds);

    let sample = stratified_subsample(&ds, 0.05, 1)?;
    show("5% sample", &sample);

    let (train, test) = split_train_test(&sample, &SplitSpec::new(0.8, 1)?)?;
    show("train", &train);
    show("test", &test);

    let first = &train.records[0];
    println!(
        "first training record: {}/{}/{} label {} -> {}",
        first.protocol_type, first.service, first.flag, first.raw_label, first.category
    );
    Ok(())
}
