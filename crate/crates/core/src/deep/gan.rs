//! GAN anomaly scorer. Generator and discriminator are trained alternately on
//! normal rows; an encoder is then fitted to invert the frozen generator. The
//! score mixes reconstruction error through `G(E(x))` with the discriminator
//! term `-ln D(x)`; higher means more anomalous.

use log::{debug, info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_width, range_tensor, rows_tensor, shuffled, INFER_CHUNK};
use crate::model::{nearest_rank_percentile, AnomalyScorer, ModelError};
use crate::nn::{loss_bce, loss_mse, LayerSpec, Mode, Sequential, Sgd, Tensor, BCE_EPS};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    pub latent: usize,
    pub hidden: usize,
    pub generator_layers: usize,
    pub discriminator_layers: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` disables the encoder; the score is then `-ln D(x)` alone.
    pub encoder_hidden: Option<Vec<usize>>,
    pub encoder_epochs: usize,
    pub encoder_lr: f64,
    pub encoder_momentum: f64,
    pub encoder_batch_size: usize,
    pub lambda: f64,
    pub percentile: f64,
    pub seed: u64,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            latent: 114,
            hidden: 128,
            generator_layers: 6,
            discriminator_layers: 6,
            dropout: 0.2,
            lr: 1e-5,
            epochs: 10,
            batch_size: 512,
            encoder_hidden: Some(vec![128, 128]),
            encoder_epochs: 5,
            encoder_lr: 0.05,
            encoder_momentum: 0.0,
            encoder_batch_size: 64,
            lambda: 0.9,
            percentile: 95.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GanEpoch {
    pub d_loss: f64,
    pub g_loss: f64,
    /// Fraction of real rows with `D > 0.5` and fakes with `D <= 0.5`.
    pub d_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanModel {
    pub generator: Sequential<f32>,
    pub discriminator: Sequential<f32>,
    pub encoder: Option<Sequential<f32>>,
    pub latent: usize,
    pub n_features: usize,
    pub lambda: f64,
    pub threshold: f64,
    pub percentile: f64,
    pub epochs: Vec<GanEpoch>,
    pub encoder_losses: Vec<f64>,
    pub rows_used: usize,
}

/// `latent -> (hidden tanh) x layers -> d`, linear output.
pub fn generator_specs(latent: usize, hidden: usize, layers: usize, d: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut inputs = latent;
    for _ in 0..layers {
        specs.push(LayerSpec::Dense { inputs, units: hidden });
        specs.push(LayerSpec::Tanh);
        inputs = hidden;
    }
    specs.push(LayerSpec::Dense { inputs, units: d });
    specs
}

/// `d -> (hidden relu dropout) x layers -> 1 sigmoid`.
pub fn discriminator_specs(d: usize, hidden: usize, layers: usize, dropout: f64) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut inputs = d;
    for _ in 0..layers {
        specs.push(LayerSpec::Dense { inputs, units: hidden });
        specs.push(LayerSpec::Relu);
        specs.push(LayerSpec::Dropout { rate: dropout });
        inputs = hidden;
    }
    specs.push(LayerSpec::Dense { inputs, units: 1 });
    specs.push(LayerSpec::Sigmoid);
    specs
}

/// `d -> (width relu)* -> latent`, linear output.
pub fn encoder_specs(d: usize, hidden: &[usize], latent: usize) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut inputs = d;
    for &units in hidden {
        specs.push(LayerSpec::Dense { inputs, units });
        specs.push(LayerSpec::Relu);
        inputs = units;
    }
    specs.push(LayerSpec::Dense { inputs, units: latent });
    specs
}

/// `-ln D` with `D` clamped to `[1e-7, 1 - 1e-7]`.
pub fn neg_log_d(d: f64) -> f64 {
    -d.clamp(BCE_EPS, 1.0 - BCE_EPS).ln()
}

fn noise<R: Rng>(n: usize, latent: usize, rng: &mut R) -> Tensor<f32> {
    let data = (0..n * latent).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    Tensor::from_vec(&[n, latent], data).expect("noise shape")
}

fn constant(n: usize, v: f32) -> Tensor<f32> {
    Tensor::from_vec(&[n, 1], vec![v; n]).expect("target shape")
}

fn finite(loss: f32, epoch: usize) -> Result<f64, ModelError> {
    if loss.is_finite() {
        Ok(loss as f64)
    } else {
        Err(ModelError::DivergenceDetected {
            epoch,
            loss: loss as f64,
        })
    }
}

impl GanModel {
    /// Untrained networks for feature width `d`.
    pub fn init(d: usize, config: &GanConfig, rng: &mut ChaCha8Rng) -> Self {
        let generator = Sequential::init(
            &generator_specs(config.latent, config.hidden, config.generator_layers, d),
            rng,
        );
        let discriminator = Sequential::init(
            &discriminator_specs(d, config.hidden, config.discriminator_layers, config.dropout),
            rng,
        );
        let encoder = config
            .encoder_hidden
            .as_ref()
            .map(|h| Sequential::init(&encoder_specs(d, h, config.latent), rng));
        Self {
            generator,
            discriminator,
            encoder,
            latent: config.latent,
            n_features: d,
            lambda: config.lambda,
            threshold: 0.0,
            percentile: config.percentile,
            epochs: Vec::new(),
            encoder_losses: Vec::new(),
            rows_used: 0,
        }
    }

    /// Samples `n` generator outputs.
    pub fn generate(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor<f32>, ModelError> {
        Ok(self.generator.predict(&noise(n, self.latent, rng))?)
    }

    /// One discriminator update on `real` (target 1) and `fake` (target 0).
    /// Returns the mean BCE before the update and the real-vs-fake accuracy.
    pub fn discriminator_step(
        &mut self,
        real: &Tensor<f32>,
        fake: &Tensor<f32>,
        opt: &mut Sgd<f32>,
        rng: &mut ChaCha8Rng,
    ) -> Result<(f64, f64), ModelError> {
        let (nr, nf) = (real.shape()[0], fake.shape()[0]);
        let d = self.n_features;
        let mut data = real.data().to_vec();
        data.extend_from_slice(fake.data());
        let x = Tensor::from_vec(&[nr + nf, d], data)?;
        let mut target = vec![1.0f32; nr];
        target.resize(nr + nf, 0.0);
        let target = Tensor::from_vec(&[nr + nf, 1], target)?;
        let out = self.discriminator.forward(&x, Mode::Train, rng)?;
        let (loss, grad) = loss_bce(&out, &target)?;
        let correct = out
            .data()
            .iter()
            .enumerate()
            .filter(|&(i, &p)| (p > 0.5) == (i < nr))
            .count();
        let tape = self.discriminator.backward(&grad)?;
        opt.step(&mut self.discriminator, &tape)?;
        Ok((loss as f64, correct as f64 / (nr + nf) as f64))
    }

    /// One generator update pushing `D(G(z))` toward 1; D is not modified.
    pub fn generator_step(&mut self, n: usize, opt: &mut Sgd<f32>, rng: &mut ChaCha8Rng) -> Result<f64, ModelError> {
        let z = noise(n, self.latent, rng);
        let fake = self.generator.forward(&z, Mode::Train, rng)?;
        let out = self.discriminator.forward(&fake, Mode::Train, rng)?;
        let (loss, grad) = loss_bce(&out, &constant(n, 1.0))?;
        let through_d = self.discriminator.backward(&grad)?;
        let tape = self.generator.backward(&through_d.input)?;
        opt.step(&mut self.generator, &tape)?;
        Ok(loss as f64)
    }

    /// Per-row `(squared reconstruction norm, -ln D)`. The reconstruction
    /// term is 0 without an encoder.
    pub fn components(&self, rows: &FeatureMatrix) -> Result<Vec<(f64, f64)>, ModelError> {
        check_width(rows, self.n_features)?;
        let mut out = Vec::with_capacity(rows.n_rows());
        let mut start = 0;
        while start < rows.n_rows() {
            let end = (start + INFER_CHUNK).min(rows.n_rows());
            let x = range_tensor(rows, start, end);
            let d = self.discriminator.predict(&x)?;
            let recon = match &self.encoder {
                Some(e) => Some(self.generator.predict(&e.predict(&x)?)?),
                None => None,
            };
            let cols = self.n_features;
            for i in 0..end - start {
                let r = recon.as_ref().map_or(0.0, |g| {
                    let xr = &x.data()[i * cols..(i + 1) * cols];
                    let gr = &g.data()[i * cols..(i + 1) * cols];
                    xr.iter()
                        .zip(gr)
                        .map(|(&a, &b)| {
                            let e = a as f64 - b as f64;
                            e * e
                        })
                        .sum()
                });
                out.push((r, neg_log_d(d.data()[i] as f64)));
            }
            start = end;
        }
        Ok(out)
    }

    /// Combines components with weight `lambda` on reconstruction. Without
    /// an encoder the score is the discriminator term alone.
    pub fn combine(&self, recon: f64, disc: f64, lambda: f64) -> f64 {
        if self.encoder.is_some() {
            lambda * recon + (1.0 - lambda) * disc
        } else {
            disc
        }
    }

    pub fn scores_with_lambda(&self, rows: &FeatureMatrix, lambda: f64) -> Result<Vec<f64>, ModelError> {
        Ok(self
            .components(rows)?
            .into_iter()
            .map(|(r, d)| self.combine(r, d, lambda))
            .collect())
    }
}

fn train_encoder(
    model: &mut GanModel,
    normal: &FeatureMatrix,
    config: &GanConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(), ModelError> {
    let Some(mut encoder) = model.encoder.take() else {
        return Ok(());
    };
    let mut opt = Sgd::new(config.encoder_lr, config.encoder_momentum);
    let mut generator = model.generator.clone();
    for epoch in 0..config.encoder_epochs {
        let order = shuffled(normal.n_rows(), rng);
        let (mut total, mut batches) = (0.0, 0);
        for idx in order.chunks(config.encoder_batch_size.max(1)) {
            let x = rows_tensor(normal, idx);
            let z = encoder.forward(&x, Mode::Train, rng)?;
            let g = generator.forward(&z, Mode::Train, rng)?;
            let (loss, grad) = loss_mse(&g, &x)?;
            total += finite(loss, epoch)?;
            batches += 1;
            let through_g = generator.backward(&grad)?;
            let tape = encoder.backward(&through_g.input)?;
            opt.step(&mut encoder, &tape)?;
        }
        let mean = total / batches as f64;
        debug!("gan encoder: epoch {} reconstruction mse {mean:.6}", epoch + 1);
        model.encoder_losses.push(mean);
    }
    model.encoder = Some(encoder);
    Ok(())
}

/// Trains on rows labelled normal (code 0) of `train`. Per batch: one
/// discriminator step on real vs generated rows, then one generator step.
/// The encoder (if configured) is fitted afterwards with the generator
/// frozen. The threshold is the configured percentile of training scores.
pub fn gan_train(train: &FeatureMatrix, config: &GanConfig) -> Result<GanModel, ModelError> {
    if config.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be positive".into()));
    }
    if !(0.0..=1.0).contains(&config.lambda) {
        return Err(ModelError::InvalidConfig(format!("lambda {} outside [0, 1]", config.lambda)));
    }
    let normal = train.filter_labels(|l| l == 0);
    info!(
        "gan: fitting on {} normal rows, skipped {} attack rows",
        normal.n_rows(),
        train.n_rows() - normal.n_rows()
    );
    if normal.n_rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = GanModel::init(normal.n_cols(), config, &mut rng);
    model.rows_used = normal.n_rows();
    let mut d_opt = Sgd::new(config.lr, 0.0);
    let mut g_opt = Sgd::new(config.lr, 0.0);

    for epoch in 0..config.epochs {
        let order = shuffled(normal.n_rows(), &mut rng);
        let (mut dl, mut gl, mut acc, mut batches) = (0.0, 0.0, 0.0, 0);
        for idx in order.chunks(config.batch_size) {
            let real = rows_tensor(&normal, idx);
            let fake = model.generate(idx.len(), &mut rng)?;
            let (d_loss, d_acc) = model
                .discriminator_step(&real, &fake, &mut d_opt, &mut rng)
                .map_err(|e| nn_divergence(e, epoch))?;
            let g_loss = model
                .generator_step(idx.len(), &mut g_opt, &mut rng)
                .map_err(|e| nn_divergence(e, epoch))?;
            dl += finite(d_loss as f32, epoch)?;
            gl += finite(g_loss as f32, epoch)?;
            acc += d_acc;
            batches += 1;
        }
        let stats = GanEpoch {
            d_loss: dl / batches as f64,
            g_loss: gl / batches as f64,
            d_accuracy: acc / batches as f64,
        };
        info!(
            "gan: epoch {} d_loss {:.5} g_loss {:.5} d_acc {:.3}",
            epoch + 1,
            stats.d_loss,
            stats.g_loss,
            stats.d_accuracy
        );
        model.epochs.push(stats);
    }

    train_encoder(&mut model, &normal, config, &mut rng)?;
    let scores = model.scores_with_lambda(&normal, model.lambda)?;
    model.threshold = nearest_rank_percentile(&scores, config.percentile).unwrap_or(0.0);
    if model.threshold == 0.0 {
        warn!("gan: zero threshold; every positive score will be flagged");
    }
    Ok(model)
}

fn nn_divergence(e: ModelError, epoch: usize) -> ModelError {
    match e {
        ModelError::Nn(inner) => ModelError::during_training(inner, epoch),
        other => other,
    }
}

pub fn gan_score(model: &GanModel, rows: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
    model.scores_with_lambda(rows, model.lambda)
}

impl AnomalyScorer for GanModel {
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        gan_score(self, rows)
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}
