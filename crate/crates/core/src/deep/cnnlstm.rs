//! Conv1d + max-pool + LSTM sequence classifier with a softmax head. Each
//! feature row is read as a one-channel sequence.

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, chunked_predict, rows_tensor, shuffled};
use crate::kdd::stratified_partition;
use crate::model::{argmax_lowest, Classifier, ModelError};
use crate::nn::{loss_sparse_ce, softmax, LayerSpec, Mode, Sequential, Sgd, Tensor};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnLstmConfig {
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub lstm_units: usize,
    pub n_classes: usize,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for CnnLstmConfig {
    fn default() -> Self {
        Self {
            filters: 64,
            kernel: 3,
            pool: 2,
            lstm_units: 64,
            n_classes: 5,
            lr: 0.01,
            momentum: 0.0,
            epochs: 20,
            batch_size: 128,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnLstmModel {
    /// Best-checkpoint parameters.
    pub net: Sequential<f32>,
    pub seq_len: usize,
    pub n_classes: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Mean cross-entropy over the fitting rows before any update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub validation_rows: usize,
}

pub fn cnnlstm_specs(config: &CnnLstmConfig) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv1d {
            in_channels: 1,
            filters: config.filters,
            kernel: config.kernel,
        },
        LayerSpec::Relu,
        LayerSpec::MaxPool1d { window: config.pool },
        LayerSpec::Lstm {
            inputs: config.filters,
            units: config.lstm_units,
        },
        LayerSpec::Dense {
            inputs: config.lstm_units,
            units: config.n_classes,
        },
    ]
}

fn as_sequences(x: Tensor<f32>) -> Tensor<f32> {
    let (n, len) = (x.shape()[0], x.shape()[1]);
    x.reshape(&[n, len, 1]).expect("same element count")
}

fn logits(net: &Sequential<f32>, m: &FeatureMatrix) -> Result<Vec<Vec<f32>>, ModelError> {
    let len = m.n_cols();
    let mut out = Vec::with_capacity(m.n_rows());
    chunked_predict(net, m, |n| vec![n, len, 1], |_, _, y| {
        let c = y.shape()[1];
        out.extend(y.data().chunks(c).map(|r| r.to_vec()));
    })?;
    Ok(out)
}

fn accuracy(net: &Sequential<f32>, m: &FeatureMatrix) -> Result<f64, ModelError> {
    if m.n_rows() == 0 {
        return Ok(0.0);
    }
    let correct = logits(net, m)?
        .iter()
        .zip(&m.labels)
        .filter(|(l, &t)| argmax_lowest(l) == t)
        .count();
    Ok(correct as f64 / m.n_rows() as f64)
}

fn mean_loss(net: &Sequential<f32>, m: &FeatureMatrix) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for (row, &t) in logits(net, m)?.iter().zip(&m.labels) {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
        let lse = max + row.iter().map(|&v| (v as f64 - max).exp()).sum::<f64>().ln();
        total += lse - row[t] as f64;
    }
    Ok(total / m.n_rows().max(1) as f64)
}

/// Trains with SGD on sparse cross-entropy. A seeded stratified share of
/// `train` is held out for validation; after every epoch the parameters with
/// the best validation accuracy so far (earliest on ties) are kept. With an
/// empty validation share, training accuracy is monitored instead.
pub fn cnnlstm_train(train: &FeatureMatrix, config: &CnnLstmConfig) -> Result<CnnLstmModel, ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    if config.batch_size == 0 || config.n_classes == 0 || config.kernel == 0 {
        return Err(ModelError::InvalidConfig("batch_size, kernel and n_classes must be positive".into()));
    }
    if let Some(&bad) = train.labels.iter().find(|&&l| l >= config.n_classes) {
        return Err(ModelError::InvalidConfig(format!(
            "label {bad} outside {} classes",
            config.n_classes
        )));
    }
    let seq_len = train.n_cols();
    let pooled = seq_len.checked_sub(config.kernel - 1).map(|l| l / config.pool.max(1));
    if pooled.is_none_or(|p| p == 0) {
        return Err(ModelError::InvalidConfig(format!(
            "sequence length {seq_len} too short for kernel {} and pool {}",
            config.kernel, config.pool
        )));
    }
    let (val_idx, fit_idx) = stratified_partition(&train.labels, config.validation_fraction, config.seed);
    let fit = train.select_rows(&fit_idx);
    let val = train.select_rows(&val_idx);
    let monitor = if val.n_rows() > 0 {
        &val
    } else {
        warn!("cnn+lstm: validation share is empty; monitoring training accuracy");
        &fit
    };
    info!("cnn+lstm: {} fitting rows, {} validation rows", fit.n_rows(), val.n_rows());

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net: Sequential<f32> = Sequential::init(&cnnlstm_specs(config), &mut rng);
    let mut opt = Sgd::new(config.lr, config.momentum);
    let initial_loss = mean_loss(&net, &fit)?;
    info!("cnn+lstm: initial loss {initial_loss:.4}");

    let mut best = (net.clone(), 0usize, f64::NEG_INFINITY);
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = shuffled(fit.n_rows(), &mut rng);
        let (mut total, mut batches) = (0.0, 0);
        for idx in order.chunks(config.batch_size) {
            let x = as_sequences(rows_tensor(&fit, idx));
            let targets: Vec<usize> = idx.iter().map(|&i| fit.labels[i]).collect();
            let y = net
                .forward(&x, Mode::Train, &mut rng)
                .map_err(|e| ModelError::during_training(e, epoch))?;
            let (loss, grad) = loss_sparse_ce(&y, &targets)?;
            if !loss.is_finite() {
                return Err(ModelError::DivergenceDetected {
                    epoch,
                    loss: loss as f64,
                });
            }
            let tape = net.backward(&grad).map_err(|e| ModelError::during_training(e, epoch))?;
            opt.step(&mut net, &tape)?;
            total += loss as f64;
            batches += 1;
        }
        let val_accuracy = accuracy(&net, monitor)?;
        let record = EpochRecord {
            loss: total / batches as f64,
            val_accuracy,
        };
        info!(
            "cnn+lstm: epoch {} loss {:.4} val_acc {:.4}",
            epoch + 1,
            record.loss,
            record.val_accuracy
        );
        if val_accuracy > best.2 {
            debug!("cnn+lstm: new best checkpoint at epoch {}", epoch + 1);
            best = (net.clone(), epoch, val_accuracy);
        }
        epochs.push(record);
    }
    let (net, best_epoch, best_val_accuracy) = if epochs.is_empty() {
        let acc = accuracy(&net, monitor)?;
        (net, 0, acc)
    } else {
        best
    };
    Ok(CnnLstmModel {
        net,
        seq_len,
        n_classes: config.n_classes,
        best_epoch,
        best_val_accuracy,
        initial_loss,
        epochs,
        validation_rows: val.n_rows(),
    })
}

impl CnnLstmModel {
    /// Softmax class probabilities per row.
    pub fn probabilities(&self, queries: &FeatureMatrix) -> Result<Vec<Vec<f32>>, ModelError> {
        check_width(queries, self.seq_len)?;
        let rows = logits(&self.net, queries)?;
        let c = self.n_classes;
        let flat: Vec<f32> = rows.into_iter().flatten().collect();
        let p = softmax(&Tensor::from_vec(&[flat.len() / c, c], flat)?);
        Ok(p.data().chunks(c).map(|r| r.to_vec()).collect())
    }
}

/// Argmax of the softmax head per query; ties go to the lowest class code.
pub fn cnnlstm_predict(model: &CnnLstmModel, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
    check_width(queries, model.seq_len)?;
    Ok(logits(&model.net, queries)?.iter().map(|l| argmax_lowest(l)).collect())
}

impl Classifier for CnnLstmModel {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        cnnlstm_predict(self, queries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CnnLstmConfig {
        CnnLstmConfig {
            filters: 4,
            lstm_units: 4,
            n_classes: 2,
            batch_size: 8,
            ..Default::default()
        }
    }

    /// Class 1 rows rise, class 0 rows fall.
    fn toy(n: usize, len: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|i| {
                let up = i % 2 == 1;
                let offset = (i / 2) as f32 * 0.01;
                (0..len)
                    .map(|t| {
                        let v = t as f32 / len as f32;
                        offset + if up { v } else { 1.0 - v }
                    })
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| i % 2).collect();
        FeatureMatrix::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn best_checkpoint_is_max_validation_accuracy() {
        let cfg = CnnLstmConfig {
            epochs: 6,
            lr: 0.1,
            validation_fraction: 0.25,
            ..small()
        };
        let m = toy(40, 8);
        let model = cnnlstm_train(&m, &cfg).unwrap();
        let max = model.epochs.iter().map(|e| e.val_accuracy).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(model.best_val_accuracy, max);
        assert_eq!(model.validation_rows, 10);
        let (val_idx, _) = stratified_partition(&m.labels, cfg.validation_fraction, cfg.seed);
        assert_eq!(accuracy(&model.net, &m.select_rows(&val_idx)).unwrap(), max);
    }

    #[test]
    fn prediction_independent_of_batching() {
        let cfg = CnnLstmConfig { epochs: 1, ..small() };
        let m = toy(30, 8);
        let model = cnnlstm_train(&m, &cfg).unwrap();
        let all = cnnlstm_predict(&model, &m).unwrap();
        let mut pieces = Vec::new();
        for chunk in [0..7, 7..8, 8..30] {
            let idx: Vec<usize> = chunk.collect();
            pieces.extend(cnnlstm_predict(&model, &m.select_rows(&idx)).unwrap());
        }
        assert_eq!(all, pieces);
        for p in model.probabilities(&m).unwrap() {
            assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let empty = FeatureMatrix::from_rows(&[], vec![]).unwrap();
        assert_eq!(cnnlstm_train(&empty, &small()).unwrap_err(), ModelError::EmptyTrainingSet);
        let short = FeatureMatrix::from_rows(&[vec![0.0, 1.0]], vec![0]).unwrap();
        assert!(matches!(cnnlstm_train(&short, &small()), Err(ModelError::InvalidConfig(_))));
    }
}
