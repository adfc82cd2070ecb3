//! Three-layer ensemble: KNN and CNN+LSTM vote on every row; where they
//! disagree, a random forest trained on the training-set disagreements
//! decides. Also shows the routing logic with hand-written layers.

use std::error::Error;

use iot_anomaly::ensemble::{ensemble_train, Ensemble, EnsembleConfig, Fallback};
use iot_anomaly::eval::confusion;
use iot_anomaly::kdd::{split_train_test, Category, SplitSpec};
use iot_anomaly::model::{Classifier, ModelError};
use iot_anomaly::preprocess::{EncodingKind, FeatureMatrix, Preprocessor};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

/// Always answers the same class.
struct Constant(usize);

impl Classifier for Constant {
    fn predict(&self, q: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        Ok(vec![self.0; q.n_rows()])
    }
}

/// Class is the first feature, rounded.
struct FirstFeature;

impl Classifier for FirstFeature {
    fn predict(&self, q: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        Ok(q.rows().map(|r| r[0].round() as usize).collect())
    }
}

fn main() -> Result<(), Box<dyn Error>> {
    // Routing with toy layers: rows where layers 1 and 2 agree keep that
    // answer, the rest go to layer 3.
    let toy = Ensemble {
        layer1: FirstFeature,
        layer2: Constant(1),
        layer3: Some(Constant(4)),
        conflict_count: 0,
        fallback: Fallback::Layer2,
    };
    let q = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0], vec![1.0], vec![0.0]], vec![0; 4])?;
    let detail = toy.predict_detailed(&q)?;
    println!("toy routing: layer1 {:?} layer2 {:?} -> {:?}", detail.layer1, detail.layer2, detail.classes);

    let ds = generate_dataset(&SynthConfig::new(20_000, 8))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 8)?)?;
    let pre = Preprocessor::fit(&train, EncodingKind::Label, false, true)?;
    let (train, test) = (pre.transform(&train)?, pre.transform(&test)?);

    let mut config = EnsembleConfig::default();
    config.knn.max_reference_rows = Some(5_000);
    config.cnnlstm.filters = 16;
    config.cnnlstm.lstm_units = 16;
    config.cnnlstm.epochs = 10;
    config.cnnlstm.lr = 0.05;
    config.forest.n_trees = 20;
    let model = ensemble_train(&train, &config)?;
    println!(
        "training conflicts {}, layer 3 {}",
        model.conflict_count,
        if model.layer3.is_some() { "fitted" } else { "not fitted (layer 2 decides)" }
    );

    let detail = model.predict_detailed(&test)?;
    let acc = |p: &[usize]| confusion(&test.labels, p, Category::COUNT).and_then(|cm| cm.accuracy());
    println!(
        "test accuracy: knn {:.4}, cnn+lstm {:.4}, ensemble {:.4}",
        acc(&detail.layer1)?,
        acc(&detail.layer2)?,
        acc(&detail.classes)?
    );
    println!("routing: {:?}", detail.stats);
    Ok(())
}
