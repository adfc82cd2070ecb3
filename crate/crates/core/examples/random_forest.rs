//! Gini random forest on label-encoded features: per-class recall and the
//! vote confidence of a few predictions.

use std::error::Error;

use iot_anomaly::eval::{class_metrics, confusion};
use iot_anomaly::kdd::{split_train_test, Category, SplitSpec};
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::shallow::{forest_fit, forest_predict, ForestConfig};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(30_000, 4))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 4)?)?;
    let pre = Preprocessor::fit(&train, EncodingKind::Label, false, true)?;
    let (train, test) = (pre.transform(&train)?, pre.transform(&test)?);

    let config = ForestConfig {
        n_trees: 20,
        n_classes: Some(Category::COUNT),
        seed: 4,
        ..Default::default()
    };
    let forest = forest_fit(&train, &config)?;
    let depths: Vec<usize> = forest.trees.iter().map(|t| t.depth()).collect();
    println!("{} trees, depths {depths:?}", forest.trees.len());

    let predicted = forest_predict(&forest, &test)?;
    let cm = confusion(&test.labels, &predicted, Category::COUNT)?;
    println!("accuracy {:.4}", cm.accuracy()?);
    for c in Category::ALL {
        let m = class_metrics(&cm, c.code());
        println!("  {:<7} support {:>5}  recall {:.3}", c.name(), m.support, m.recall);
    }

    for (class, confidence) in forest.predict_with_confidence(&test.select_rows(&[0, 1, 2]))? {
        println!("predicted {} with {:.0}% of votes", Category::ALL[class], confidence * 100.0);
    }
    Ok(())
}
