//! Autoencoder anomaly scoring: fit on normal traffic only, flag rows whose
//! reconstruction error exceeds a percentile of the training errors.

use std::error::Error;

use iot_anomaly::deep::{ae_train, AeConfig};
use iot_anomaly::eval::{EvalReport, RunMetadata};
use iot_anomaly::kdd::{split_train_test, SplitSpec};
use iot_anomaly::model::AnomalyScorer;
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(30_000, 5))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 5)?)?;
    let pre = Preprocessor::fit(&train, EncodingKind::OneHot, true, true)?;
    let (train, test) = (pre.transform(&train)?, pre.transform(&test)?);

    let config = AeConfig {
        epochs: 10,
        seed: 5,
        ..Default::default()
    };
    let ae = ae_train(&train, &config)?;
    println!(
        "fitted on {} normal rows ({} attack rows skipped); loss {:.5} -> {:.5}",
        ae.rows_used,
        ae.rows_skipped,
        ae.initial_loss,
        ae.epoch_losses.last().unwrap()
    );
    println!("threshold at p{}: {:.6}", ae.percentile, ae.threshold);

    let scores = ae.score(&test)?;
    let is_attack: Vec<bool> = test.labels.iter().map(|&l| l > 0).collect();
    let mean = |want: bool| {
        let v: Vec<f64> = scores.iter().zip(&is_attack).filter(|(_, &a)| a == want).map(|(s, _)| *s).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!("mean error: normal {:.6}, attack {:.6}", mean(false), mean(true));

    let flagged = ae.classify(&test)?;
    let report = EvalReport::build_binary(&is_attack, &flagged, RunMetadata::default())?;
    let b = report.binary();
    println!("binary accuracy {:.4}, precision {:.4}, recall {:.4}", b.accuracy, b.precision, b.recall);

    // A stricter threshold trades recall for precision.
    let normal = train.filter_labels(|l| l == 0);
    let strict = ae.clone().with_percentile(&ae.score(&normal)?, 99.0);
    let report = EvalReport::build_binary(&is_attack, &strict.classify(&test)?, RunMetadata::default())?;
    println!("at p99: precision {:.4}, recall {:.4}", report.binary().precision, report.binary().recall);
    Ok(())
}
