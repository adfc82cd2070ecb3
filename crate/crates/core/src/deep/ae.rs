//! Dense autoencoder trained on normal traffic; the anomaly score is the
//! per-row mean squared reconstruction error.

use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_width, chunked_predict, rows_tensor, shuffled};
use crate::model::{nearest_rank_percentile, AnomalyScorer, ModelError};
use crate::nn::{loss_mse, row_mse, LayerSpec, Mode, Sequential, Sgd};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Widths of the three hidden layers (tanh, ReLU, tanh).
    pub hidden: [usize; 3],
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub percentile: f64,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            hidden: [64, 32, 64],
            lr: 0.1,
            momentum: 0.0,
            epochs: 20,
            batch_size: 256,
            percentile: 95.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub net: Sequential<f32>,
    pub threshold: f64,
    pub percentile: f64,
    pub n_features: usize,
    /// Mean reconstruction MSE over the training rows before the first update.
    pub initial_loss: f64,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Normal rows the model was fitted on; other rows were skipped.
    pub rows_used: usize,
    pub rows_skipped: usize,
}

/// `d -> h0 tanh -> h1 relu -> h2 tanh -> d` with a linear output.
pub fn ae_specs(d: usize, hidden: [usize; 3]) -> Vec<LayerSpec> {
    let [a, b, c] = hidden;
    vec![
        LayerSpec::Dense { inputs: d, units: a },
        LayerSpec::Tanh,
        LayerSpec::Dense { inputs: a, units: b },
        LayerSpec::Relu,
        LayerSpec::Dense { inputs: b, units: c },
        LayerSpec::Tanh,
        LayerSpec::Dense { inputs: c, units: d },
    ]
}

fn reconstruction_errors(net: &Sequential<f32>, m: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    let mut scores = vec![0.0; m.n_rows()];
    let cols = m.n_cols();
    chunked_predict(net, m, |n| vec![n, cols], |start, m, out| {
        let x = super::range_tensor(m, start, start + out.shape()[0]);
        for (i, e) in row_mse(&out, &x).into_iter().enumerate() {
            scores[start + i] = e;
        }
    })?;
    Ok(scores)
}

/// Fits the autoencoder on the rows of `train` labelled normal (code 0);
/// attack rows are skipped and counted. The threshold is the configured
/// nearest-rank percentile of the training reconstruction errors.
pub fn ae_train(train: &FeatureMatrix, config: &AeConfig) -> Result<AeModel, ModelError> {
    if config.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be positive".into()));
    }
    let normal = train.filter_labels(|l| l == 0);
    let rows_used = normal.n_rows();
    let rows_skipped = train.n_rows() - rows_used;
    info!("autoencoder: fitting on {rows_used} normal rows, skipped {rows_skipped} attack rows");
    if rows_used == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let d = normal.n_cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net: Sequential<f32> = Sequential::init(&ae_specs(d, config.hidden), &mut rng);
    let mut opt = Sgd::new(config.lr, config.momentum);

    let initial = reconstruction_errors(&net, &normal)?;
    let initial_loss = initial.iter().sum::<f64>() / initial.len() as f64;
    debug!("autoencoder: initial reconstruction mse {initial_loss:.6}");

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let order = shuffled(rows_used, &mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for idx in order.chunks(config.batch_size) {
            let x = rows_tensor(&normal, idx);
            let y = net
                .forward(&x, Mode::Train, &mut rng)
                .map_err(|e| ModelError::during_training(e, epoch))?;
            let (loss, grad) = loss_mse(&y, &x)?;
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
        let mean = total / batches as f64;
        debug!("autoencoder: epoch {} loss {mean:.6}", epoch + 1);
        epoch_losses.push(mean);
    }

    let errors = reconstruction_errors(&net, &normal)?;
    let threshold = nearest_rank_percentile(&errors, config.percentile).unwrap_or(0.0);
    info!(
        "autoencoder: final train mse {:.6}, threshold {threshold:.6} at p{}",
        errors.iter().sum::<f64>() / errors.len() as f64,
        config.percentile
    );
    Ok(AeModel {
        net,
        threshold,
        percentile: config.percentile,
        n_features: d,
        initial_loss,
        epoch_losses,
        rows_used,
        rows_skipped,
    })
}

/// Per-row mean squared reconstruction error.
pub fn ae_score(model: &AeModel, rows: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    check_width(rows, model.n_features)?;
    reconstruction_errors(&model.net, rows)
}

impl AeModel {
    /// Re-derives the threshold from training errors at another percentile.
    pub fn with_percentile(mut self, train_normal_scores: &[f64], percentile: f64) -> Self {
        self.threshold = nearest_rank_percentile(train_normal_scores, percentile).unwrap_or(self.threshold);
        self.percentile = percentile;
        self
    }
}

impl AnomalyScorer for AeModel {
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        ae_score(self, rows)
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}
