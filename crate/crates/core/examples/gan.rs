//! GAN anomaly scoring: a generator and discriminator trained on normal
//! traffic, plus an encoder fitted afterwards so the generator can
//! reconstruct a row. The score mixes reconstruction error with -ln D(x).

use std::error::Error;

use iot_anomaly::deep::{default_percentile_grid, gan_train, tune_percentile, GanConfig};
use iot_anomaly::kdd::{split_train_test, SplitSpec};
use iot_anomaly::model::AnomalyScorer;
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(30_000, 6))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 6)?)?;
    let (fit, holdout) = split_train_test(&train, &SplitSpec::new(0.9, 6)?)?;
    let pre = Preprocessor::fit(&fit, EncodingKind::Label, false, true)?;
    let (fit, holdout, test) = (pre.transform(&fit)?, pre.transform(&holdout)?, pre.transform(&test)?);

    let config = GanConfig {
        hidden: 64,
        generator_layers: 3,
        discriminator_layers: 3,
        latent: 32,
        seed: 6,
        ..Default::default()
    };
    let mut gan = gan_train(&fit, &config)?;
    for (i, e) in gan.epochs.iter().enumerate() {
        println!("epoch {i}: d_loss {:.4} g_loss {:.4} d_acc {:.3}", e.d_loss, e.g_loss, e.d_accuracy);
    }

    let parts = gan.components(&test)?;
    let mean = |attack: bool, f: fn(&(f64, f64)) -> f64| {
        let v: Vec<f64> = parts.iter().zip(&test.labels).filter(|(_, &l)| (l > 0) == attack).map(|(p, _)| f(p)).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!(
        "reconstruction: normal {:.4} attack {:.4};  -ln D: normal {:.4} attack {:.4}",
        mean(false, |p| p.0),
        mean(true, |p| p.0),
        mean(false, |p| p.1),
        mean(true, |p| p.1)
    );

    // Choose the threshold percentile on the holdout rows, never on test.
    let normal_scores = gan.score(&fit.filter_labels(|l| l == 0))?;
    let holdout_attack: Vec<bool> = holdout.labels.iter().map(|&l| l > 0).collect();
    let (p, theta, acc) = tune_percentile(&normal_scores, &gan.score(&holdout)?, &holdout_attack, &default_percentile_grid())
        .expect("holdout is not empty");
    gan.threshold = theta;
    println!("tuned percentile {p} (holdout accuracy {acc:.4})");

    let flagged = gan.classify(&test)?;
    let correct = flagged.iter().zip(&test.labels).filter(|(&f, &l)| f == (l > 0)).count();
    println!("test binary accuracy {:.4}", correct as f64 / test.n_rows() as f64);
    Ok(())
}
