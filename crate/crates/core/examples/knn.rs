//! Brute-force k-nearest-neighbour classification of the five traffic
//! categories, with a capped reference set.

use std::error::Error;
use std::time::Instant;

use iot_anomaly::eval::{confusion, metrics, MetricMode};
use iot_anomaly::kdd::{split_train_test, Category, SplitSpec};
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::shallow::{knn_fit, knn_predict, KnnConfig};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(30_000, 3))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 3)?)?;
    let pre = Preprocessor::fit(&train, EncodingKind::Label, false, true)?;
    let (train, test) = (pre.transform(&train)?, pre.transform(&test)?);

    let config = KnnConfig {
        k: 5,
        max_reference_rows: Some(5_000),
        seed: 3,
    };
    let model = knn_fit(&train, &config)?;
    println!("reference rows {} of {}", model.reference.n_rows(), model.original_rows);

    let start = Instant::now();
    let predicted = knn_predict(&model, &test)?;
    println!("{} queries in {:.2?}", test.n_rows(), start.elapsed());

    let cm = confusion(&test.labels, &predicted, Category::COUNT)?;
    for mode in MetricMode::ALL {
        let m = metrics(&cm, mode)?;
        println!("{:<9} accuracy {:.4}  f1 {:.4}", mode.name(), m.accuracy, m.f1);
    }

    let nearest: Vec<String> = model
        .neighbours(test.row(0))
        .iter()
        .map(|&(d, i)| format!("row {i} ({}, distance {d:.3})", Category::ALL[model.reference.labels[i]].name()))
        .collect();
    println!("test row 0 is {}; neighbours: {}", Category::ALL[test.labels[0]].name(), nearest.join(", "));
    Ok(())
}
