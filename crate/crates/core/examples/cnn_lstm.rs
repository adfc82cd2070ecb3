//! Conv1d -> max-pool -> LSTM -> softmax classifier over the 41 features read
//! as a one-channel sequence, with best-epoch checkpointing on a validation
//! share of the training rows.

use std::error::Error;

use iot_anomaly::deep::cnnlstm::cnnlstm_specs;
use iot_anomaly::deep::{cnnlstm_predict, cnnlstm_train, CnnLstmConfig};
use iot_anomaly::eval::confusion;
use iot_anomaly::kdd::{split_train_test, Category, SplitSpec};
use iot_anomaly::preprocess::{EncodingKind, Preprocessor};
use iot_anomaly::synth::{generate_dataset, SynthConfig};

fn main() -> Result<(), Box<dyn Error>> {
    let ds = generate_dataset(&SynthConfig::new(20_000, 7))?;
    let (train, test) = split_train_test(&ds, &SplitSpec::new(0.8, 7)?)?;
    let pre = Preprocessor::fit(&train, EncodingKind::Label, false, true)?;
    let (train, test) = (pre.transform(&train)?, pre.transform(&test)?);

    let config = CnnLstmConfig {
        filters: 16,
        lstm_units: 16,
        // Smaller than the defaults, so a larger step gets past the early
        // majority-class plateau within a few epochs.
        lr: 0.05,
        epochs: 12,
        seed: 7,
        ..Default::default()
    };
    println!("layers: {:?}", cnnlstm_specs(&config));
    let model = cnnlstm_train(&train, &config)?;
    println!("initial loss {:.4}", model.initial_loss);
    for (i, e) in model.epochs.iter().enumerate() {
        println!("epoch {i:>2}: loss {:.4}  validation accuracy {:.4}", e.loss, e.val_accuracy);
    }
    println!("kept epoch {} ({:.4})", model.best_epoch, model.best_val_accuracy);

    let predicted = cnnlstm_predict(&model, &test)?;
    let cm = confusion(&test.labels, &predicted, Category::COUNT)?;
    println!("test accuracy {:.4}, binary {:.4}", cm.accuracy()?, cm.binary().accuracy()?);

    let probs = model.probabilities(&test.select_rows(&[0]))?;
    println!("class probabilities for test row 0: {:.3?}", probs[0]);
    Ok(())
}
