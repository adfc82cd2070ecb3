//! Run configuration: flat `key = value` text with dotted section keys.
//!
//! ```text
//! # comments start with '#'
//! model = ensemble
//! seed = 7
//! knn.k = 5
//! ae.hidden = 64,32,64
//! ```
//!
//! Unknown keys are rejected. Values resolve CLI > file > defaults; the
//! resolved configuration is rendered back in the same format.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deep::{AeConfig, CnnLstmConfig, GanConfig};
use crate::ensemble::EnsembleConfig;
use crate::kdd::sha256_hex;
use crate::preprocess::EncodingKind;
use crate::shallow::{ForestConfig, KnnConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ae,
    Gan,
    Knn,
    Rf,
    Cnnlstm,
    Ensemble,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Ae,
        ModelKind::Gan,
        ModelKind::Knn,
        ModelKind::Rf,
        ModelKind::Cnnlstm,
        ModelKind::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ae => "ae",
            ModelKind::Gan => "gan",
            ModelKind::Knn => "knn",
            ModelKind::Rf => "rf",
            ModelKind::Cnnlstm => "cnnlstm",
            ModelKind::Ensemble => "ensemble",
        }
    }

    /// One-hot for the autoencoder, label encoding elsewhere.
    pub fn encoding(self) -> EncodingKind {
        match self {
            ModelKind::Ae => EncodingKind::OneHot,
            _ => EncodingKind::Label,
        }
    }

    /// Row L2 normalisation default: on for the neural anomaly scorers.
    pub fn default_l2(self) -> bool {
        matches!(self, ModelKind::Ae | ModelKind::Gan)
    }

    pub fn is_scorer(self) -> bool {
        matches!(self, ModelKind::Ae | ModelKind::Gan)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("expected one of ae, gan, knn, rf, cnnlstm, ensemble"))
    }
}

/// Default dataset location, relative to the working directory.
pub const DEFAULT_DATA: &str = "data/kddcup.data_10_percent";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub model: ModelKind,
    pub seed: u64,
    pub out: PathBuf,
    pub train_fraction: f64,
    /// Stratified subsample applied before the split; 1 keeps everything.
    pub subsample: f64,
    pub lenient_categories: bool,
    /// `None` uses the model's default.
    pub l2_normalize: Option<bool>,
    pub ae: AeConfig,
    pub gan: GanConfig,
    /// Tune the GAN threshold percentile on a held-out share of train.
    pub gan_tune_threshold: bool,
    pub gan_validation_fraction: f64,
    pub knn: KnnConfig,
    pub forest: ForestConfig,
    pub cnnlstm: CnnLstmConfig,
    pub min_conflicts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from(DEFAULT_DATA),
            model: ModelKind::Ensemble,
            seed: 0,
            out: PathBuf::from("runs/latest"),
            train_fraction: 0.8,
            subsample: 1.0,
            lenient_categories: false,
            l2_normalize: None,
            ae: AeConfig::default(),
            gan: GanConfig::default(),
            gan_tune_threshold: false,
            gan_validation_fraction: 0.1,
            knn: KnnConfig::default(),
            forest: ForestConfig::default(),
            cnnlstm: CnnLstmConfig::default(),
            min_conflicts: 10,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>, ConfigError> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn fraction(key: &str, value: &str, lo_open: bool, hi_closed: bool) -> Result<f64, ConfigError> {
    let v: f64 = parse(key, value)?;
    let lo_ok = if lo_open { v > 0.0 } else { v >= 0.0 };
    let hi_ok = if hi_closed { v <= 1.0 } else { v < 1.0 };
    if !(lo_ok && hi_ok) {
        return Err(invalid(key, value, "fraction out of range"));
    }
    Ok(v)
}

fn percentile(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(key, value)?;
    if !(v > 0.0 && v < 100.0) {
        return Err(invalid(key, value, "percentile must lie in (0, 100)"));
    }
    Ok(v)
}

impl RunConfig {
    /// Every key, in rendering order.
    pub const KEYS: &'static [&'static str] = &[
        "data",
        "model",
        "seed",
        "out",
        "split.train_fraction",
        "subsample",
        "preprocess.lenient_categories",
        "preprocess.l2_normalize",
        "ae.hidden",
        "ae.lr",
        "ae.momentum",
        "ae.epochs",
        "ae.batch_size",
        "ae.threshold_percentile",
        "gan.latent",
        "gan.hidden",
        "gan.generator_layers",
        "gan.discriminator_layers",
        "gan.dropout",
        "gan.lr",
        "gan.epochs",
        "gan.batch_size",
        "gan.encoder_hidden",
        "gan.encoder_epochs",
        "gan.encoder_lr",
        "gan.encoder_momentum",
        "gan.encoder_batch_size",
        "gan.lambda",
        "gan.threshold_percentile",
        "gan.tune_threshold",
        "gan.validation_fraction",
        "knn.k",
        "knn.max_reference_rows",
        "forest.n_trees",
        "forest.max_depth",
        "forest.min_samples_split",
        "forest.features_per_split",
        "cnnlstm.filters",
        "cnnlstm.kernel",
        "cnnlstm.pool",
        "cnnlstm.lstm_units",
        "cnnlstm.lr",
        "cnnlstm.momentum",
        "cnnlstm.epochs",
        "cnnlstm.batch_size",
        "cnnlstm.validation_fraction",
        "ensemble.min_conflicts",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "data" => self.data = PathBuf::from(v),
            "model" => self.model = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "split.train_fraction" => self.train_fraction = fraction(key, v, true, false)?,
            "subsample" => self.subsample = fraction(key, v, true, true)?,
            "preprocess.lenient_categories" => self.lenient_categories = parse(key, v)?,
            "preprocess.l2_normalize" => {
                self.l2_normalize = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "ae.hidden" => {
                let h = parse_list(key, v)?;
                self.ae.hidden = h.try_into().map_err(|_| invalid(key, v, "expected three widths"))?;
            }
            "ae.lr" => self.ae.lr = parse(key, v)?,
            "ae.momentum" => self.ae.momentum = fraction(key, v, false, false)?,
            "ae.epochs" => self.ae.epochs = parse(key, v)?,
            "ae.batch_size" => self.ae.batch_size = parse(key, v)?,
            "ae.threshold_percentile" => self.ae.percentile = percentile(key, v)?,
            "gan.latent" => self.gan.latent = parse(key, v)?,
            "gan.hidden" => self.gan.hidden = parse(key, v)?,
            "gan.generator_layers" => self.gan.generator_layers = parse(key, v)?,
            "gan.discriminator_layers" => self.gan.discriminator_layers = parse(key, v)?,
            "gan.dropout" => self.gan.dropout = fraction(key, v, false, false)?,
            "gan.lr" => self.gan.lr = parse(key, v)?,
            "gan.epochs" => self.gan.epochs = parse(key, v)?,
            "gan.batch_size" => self.gan.batch_size = parse(key, v)?,
            "gan.encoder_hidden" => {
                self.gan.encoder_hidden = if v == "none" { None } else { Some(parse_list(key, v)?) }
            }
            "gan.encoder_epochs" => self.gan.encoder_epochs = parse(key, v)?,
            "gan.encoder_lr" => self.gan.encoder_lr = parse(key, v)?,
            "gan.encoder_momentum" => self.gan.encoder_momentum = fraction(key, v, false, false)?,
            "gan.encoder_batch_size" => self.gan.encoder_batch_size = parse(key, v)?,
            "gan.lambda" => self.gan.lambda = fraction(key, v, false, true)?,
            "gan.threshold_percentile" => self.gan.percentile = percentile(key, v)?,
            "gan.tune_threshold" => self.gan_tune_threshold = parse(key, v)?,
            "gan.validation_fraction" => self.gan_validation_fraction = fraction(key, v, true, false)?,
            "knn.k" => self.knn.k = parse(key, v)?,
            "knn.max_reference_rows" => {
                self.knn.max_reference_rows = if v == "none" { None } else { Some(parse(key, v)?) }
            }
            "forest.n_trees" => self.forest.n_trees = parse(key, v)?,
            "forest.max_depth" => self.forest.max_depth = parse(key, v)?,
            "forest.min_samples_split" => self.forest.min_samples_split = parse(key, v)?,
            "forest.features_per_split" => {
                self.forest.features_per_split = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "cnnlstm.filters" => self.cnnlstm.filters = parse(key, v)?,
            "cnnlstm.kernel" => self.cnnlstm.kernel = parse(key, v)?,
            "cnnlstm.pool" => self.cnnlstm.pool = parse(key, v)?,
            "cnnlstm.lstm_units" => self.cnnlstm.lstm_units = parse(key, v)?,
            "cnnlstm.lr" => self.cnnlstm.lr = parse(key, v)?,
            "cnnlstm.momentum" => self.cnnlstm.momentum = fraction(key, v, false, false)?,
            "cnnlstm.epochs" => self.cnnlstm.epochs = parse(key, v)?,
            "cnnlstm.batch_size" => self.cnnlstm.batch_size = parse(key, v)?,
            "cnnlstm.validation_fraction" => self.cnnlstm.validation_fraction = fraction(key, v, false, false)?,
            "ensemble.min_conflicts" => self.min_conflicts = parse(key, v)?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |o: Option<usize>, none: &str| o.map_or(none.to_string(), |v| v.to_string());
        Some(match key {
            "data" => self.data.display().to_string(),
            "model" => self.model.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            "split.train_fraction" => self.train_fraction.to_string(),
            "subsample" => self.subsample.to_string(),
            "preprocess.lenient_categories" => self.lenient_categories.to_string(),
            "preprocess.l2_normalize" => self.l2_normalize.map_or("auto".into(), |b| b.to_string()),
            "ae.hidden" => list(&self.ae.hidden),
            "ae.lr" => self.ae.lr.to_string(),
            "ae.momentum" => self.ae.momentum.to_string(),
            "ae.epochs" => self.ae.epochs.to_string(),
            "ae.batch_size" => self.ae.batch_size.to_string(),
            "ae.threshold_percentile" => self.ae.percentile.to_string(),
            "gan.latent" => self.gan.latent.to_string(),
            "gan.hidden" => self.gan.hidden.to_string(),
            "gan.generator_layers" => self.gan.generator_layers.to_string(),
            "gan.discriminator_layers" => self.gan.discriminator_layers.to_string(),
            "gan.dropout" => self.gan.dropout.to_string(),
            "gan.lr" => self.gan.lr.to_string(),
            "gan.epochs" => self.gan.epochs.to_string(),
            "gan.batch_size" => self.gan.batch_size.to_string(),
            "gan.encoder_hidden" => self.gan.encoder_hidden.as_deref().map_or("none".into(), list),
            "gan.encoder_epochs" => self.gan.encoder_epochs.to_string(),
            "gan.encoder_lr" => self.gan.encoder_lr.to_string(),
            "gan.encoder_momentum" => self.gan.encoder_momentum.to_string(),
            "gan.encoder_batch_size" => self.gan.encoder_batch_size.to_string(),
            "gan.lambda" => self.gan.lambda.to_string(),
            "gan.threshold_percentile" => self.gan.percentile.to_string(),
            "gan.tune_threshold" => self.gan_tune_threshold.to_string(),
            "gan.validation_fraction" => self.gan_validation_fraction.to_string(),
            "knn.k" => self.knn.k.to_string(),
            "knn.max_reference_rows" => opt(self.knn.max_reference_rows, "none"),
            "forest.n_trees" => self.forest.n_trees.to_string(),
            "forest.max_depth" => self.forest.max_depth.to_string(),
            "forest.min_samples_split" => self.forest.min_samples_split.to_string(),
            "forest.features_per_split" => opt(self.forest.features_per_split, "auto"),
            "cnnlstm.filters" => self.cnnlstm.filters.to_string(),
            "cnnlstm.kernel" => self.cnnlstm.kernel.to_string(),
            "cnnlstm.pool" => self.cnnlstm.pool.to_string(),
            "cnnlstm.lstm_units" => self.cnnlstm.lstm_units.to_string(),
            "cnnlstm.lr" => self.cnnlstm.lr.to_string(),
            "cnnlstm.momentum" => self.cnnlstm.momentum.to_string(),
            "cnnlstm.epochs" => self.cnnlstm.epochs.to_string(),
            "cnnlstm.batch_size" => self.cnnlstm.batch_size.to_string(),
            "cnnlstm.validation_fraction" => self.cnnlstm.validation_fraction.to_string(),
            "ensemble.min_conflicts" => self.min_conflicts.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    /// Desk-scale preset: 5% stratified subsample, KNN capped at 20,000
    /// reference rows, epochs unchanged. Unseen categories are tolerated,
    /// since a 5% sample drops rare service tokens from the training split.
    pub fn desk_scale(&mut self) {
        self.subsample = 0.05;
        self.knn.max_reference_rows = Some(20_000);
        self.lenient_categories = true;
    }

    /// Resolved configuration in file format, every key present.
    pub fn render(&self) -> String {
        self.render_keys(|_| true)
    }

    fn render_keys(&self, keep: impl Fn(&str) -> bool) -> String {
        let mut out = String::new();
        for &key in Self::KEYS.iter().filter(|k| keep(k)) {
            out.push_str(&format!("{key} = {}\n", self.get(key).expect("known key")));
        }
        out
    }

    /// Configuration without the output location, as stored in bundles.
    pub fn render_portable(&self) -> String {
        self.render_keys(|k| k != "out")
    }

    /// SHA-256 of the portable rendering.
    pub fn hash(&self) -> String {
        sha256_hex(self.render_portable().as_bytes())
    }

    pub fn l2(&self) -> bool {
        self.l2_normalize.unwrap_or(self.model.default_l2())
    }

    /// Sub-model configurations with the run seed applied.
    pub fn ae_config(&self) -> AeConfig {
        AeConfig {
            seed: self.seed,
            ..self.ae.clone()
        }
    }

    pub fn gan_config(&self) -> GanConfig {
        GanConfig {
            seed: self.seed,
            ..self.gan.clone()
        }
    }

    pub fn knn_config(&self) -> KnnConfig {
        KnnConfig {
            seed: self.seed,
            ..self.knn.clone()
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            seed: self.seed,
            n_classes: Some(crate::kdd::Category::COUNT),
            ..self.forest.clone()
        }
    }

    pub fn cnnlstm_config(&self) -> CnnLstmConfig {
        CnnLstmConfig {
            seed: self.seed,
            ..self.cnnlstm.clone()
        }
    }

    pub fn ensemble_config(&self) -> EnsembleConfig {
        EnsembleConfig {
            knn: self.knn_config(),
            cnnlstm: self.cnnlstm_config(),
            forest: self.forest_config(),
            min_conflicts: self.min_conflicts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.set("model", "gan").unwrap();
        c.set("gan.encoder_hidden", "none").unwrap();
        c.set("knn.max_reference_rows", "none").unwrap();
        c.set("ae.hidden", "8, 4, 8").unwrap();
        c.desk_scale();
        assert_eq!(RunConfig::from_text(&c.render()).unwrap(), c);
        assert_eq!(RunConfig::from_text(&RunConfig::default().render()).unwrap(), RunConfig::default());
    }

    #[test]
    fn every_key_is_gettable_and_settable() {
        let c = RunConfig::default();
        for key in RunConfig::KEYS {
            let v = c.get(key).unwrap();
            RunConfig::default().set(key, &v).unwrap();
        }
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        assert_eq!(
            RunConfig::from_text("knn.kk = 3").unwrap_err(),
            ConfigError::UnknownKey("knn.kk".into())
        );
        assert_eq!(RunConfig::from_text("\n\nnonsense").unwrap_err(), ConfigError::Syntax { line: 3 });
        assert!(matches!(
            RunConfig::from_text("split.train_fraction = 1.0"),
            Err(ConfigError::InvalidValue { .. })
        ));
        assert!(matches!(RunConfig::from_text("model = svm"), Err(ConfigError::InvalidValue { .. })));
    }

    #[test]
    fn comments_and_hash() {
        let c = RunConfig::from_text("# header\nseed = 7  # trailing\n").unwrap();
        assert_eq!(c.seed, 7);
        let mut moved = c.clone();
        moved.out = PathBuf::from("elsewhere");
        assert_eq!(moved.hash(), c.hash());
        assert_ne!(RunConfig::default().hash(), c.hash());
    }
}
