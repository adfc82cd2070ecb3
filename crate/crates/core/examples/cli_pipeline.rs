//! The command-line workflow driven from code: train a model into a bundle
//! directory, reload it, evaluate the held-out split and score raw lines.
//!
//!     cargo run --release --example cli_pipeline -- [ae|gan|knn|rf|cnnlstm|ensemble]

use std::error::Error;

use iot_anomaly::bundle::ModelBundle;
use iot_anomaly::cli::{cmd_evaluate, cmd_train, score_text, EvalOptions};
use iot_anomaly::config::{ModelKind, RunConfig};
use iot_anomaly::synth::{generate_lines, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let model: ModelKind = std::env::args().nth(1).as_deref().unwrap_or("ae").parse()?;
    let out = std::env::temp_dir().join(format!("iot-anomaly-example-{model}"));

    let mut config = RunConfig::from_text(
        "data = synthetic:40000:9
         seed = 9
         preprocess.lenient_categories = true
         knn.max_reference_rows = 5000
         forest.n_trees = 20
         cnnlstm.filters = 16
         cnnlstm.lstm_units = 16
         cnnlstm.epochs = 8
         cnnlstm.lr = 0.05
         gan.tune_threshold = true",
    )?;
    config.model = model;
    config.out = out.clone();
    println!("config hash {}", config.hash());

    let trained = cmd_train(&config)?;
    println!("trained on {} rows; bundle in {}", trained.log.train_rows, trained.bundle_dir.display());

    let manifest = ModelBundle::manifest(&trained.bundle_dir)?;
    println!(
        "manifest: {} tensors, thresholds {:?}, children {:?}",
        manifest.tensors.len(),
        manifest.thresholds,
        manifest.children
    );

    let eval = cmd_evaluate(&trained.bundle_dir, &config, &EvalOptions::default())?;
    print!("{}", eval.report);
    println!("report at {}", eval.report_path.display());

    let bundle = ModelBundle::load(&trained.bundle_dir)?;
    let lines = generate_lines(&SynthConfig::new(2_000, 10));
    let sample: Vec<&str> = lines.iter().step_by(250).map(String::as_str).collect();
    for line in score_text(&bundle, &sample.join("\n"))?.lines {
        println!("{line}");
    }
    Ok(())
}
