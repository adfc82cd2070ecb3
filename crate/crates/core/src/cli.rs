//! The four pipeline commands behind the `iot-anomaly` binary: `ingest`,
//! `train`, `evaluate` and `score`. Each is a plain function so examples and
//! tests can drive the pipeline without a subprocess.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::bundle::{BundleError, ModelBundle, TrainedModel};
use crate::config::{ConfigError, ModelKind, RunConfig};
use crate::deep::{ae_train, cnnlstm_train, default_percentile_grid, gan_train, tune_percentile, AeModel, CnnLstmModel, GanModel};
use crate::ensemble::{ensemble_train, EnsembleModel};
use crate::eval::{EvalError, EvalReport, RunMetadata};
use crate::kdd::{
    load_dataset, parse_unlabelled, split_train_test, stratified_partition, stratified_subsample, Category, Dataset,
    IngestError, SplitError, SplitSpec,
};
use crate::model::{nearest_rank_percentile, AnomalyScorer, ModelError};
use crate::preprocess::{FeatureMatrix, PreprocessError, Preprocessor};
use crate::shallow::{forest_fit, knn_fit, ForestModel, KnnModel};
use crate::synth::{generate_dataset, SynthConfig};

pub const BUNDLE_DIR: &str = "bundle";
pub const TRAINING_LOG: &str = "training_log.json";
pub const RESOLVED_CONFIG: &str = "resolved_config.txt";
pub const EVAL_REPORT: &str = "eval_report.json";

/// Tolerance used when printing reference delta tables.
pub const REFERENCE_TOLERANCE: f64 = 0.015;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bundle was trained on dataset {bundle} but {data} has checksum {found}; pass --force to evaluate anyway")]
    ChecksumMismatch { bundle: String, data: String, found: String },
    #[error("{failed} of {total} records could not be scored")]
    ScoreFailures { failed: usize, total: usize },
}

impl CliError {
    /// 1 usage/configuration, 2 data or I/O, 3 training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Model(ModelError::DivergenceDetected { .. }) => 3,
            CliError::Model(ModelError::InvalidConfig(_) | ModelError::KTooLarge { .. }) => 1,
            CliError::Bundle(BundleError::Model(ModelError::DivergenceDetected { .. })) => 3,
            _ => 2,
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a dataset file, or generates one for `synthetic:<records>:<seed>`.
pub fn load_source(data: &Path) -> Result<Dataset, CliError> {
    let text = data.to_string_lossy();
    if let Some(rest) = text.strip_prefix("synthetic:") {
        let bad = || CliError::Usage(format!("expected synthetic:<records>:<seed>, got {text}"));
        let (n, seed) = rest.split_once(':').ok_or_else(bad)?;
        let records = n.parse().map_err(|_| bad())?;
        let seed = seed.parse().map_err(|_| bad())?;
        return Ok(generate_dataset(&SynthConfig::new(records, seed))?);
    }
    Ok(load_dataset(data)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub path: String,
    pub records: usize,
    pub counts: BTreeMap<Category, usize>,
    pub checksum: String,
}

impl std::fmt::Display for IngestSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}: {} records", self.path, self.records)?;
        for (c, n) in &self.counts {
            writeln!(f, "  {:<7} {n:>8}", c.name())?;
        }
        writeln!(f, "  sha256  {}", self.checksum)
    }
}

pub fn cmd_ingest(data: &Path) -> Result<IngestSummary, CliError> {
    let ds = load_source(data)?;
    Ok(IngestSummary {
        path: ds.source_path.clone(),
        records: ds.len(),
        counts: ds.category_counts(),
        checksum: ds.checksum.clone(),
    })
}

/// Train/test portions after the optional subsample, plus the checksum of
/// the full source.
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub checksum: String,
}

pub fn prepare_splits(config: &RunConfig) -> Result<Splits, CliError> {
    let full = load_source(&config.data)?;
    let checksum = full.checksum.clone();
    let sampled = stratified_subsample(&full, config.subsample, config.seed)?;
    info!("{} of {} records after subsampling", sampled.len(), full.len());
    let (train, test) = split_train_test(&sampled, &SplitSpec::new(config.train_fraction, config.seed)?)?;
    Ok(Splits { train, test, checksum })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub model: ModelKind,
    pub seed: u64,
    pub config_hash: String,
    pub dataset_checksum: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub train_counts: BTreeMap<Category, usize>,
    pub features: usize,
    pub details: Value,
}

pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub log: TrainingLog,
    pub bundle_dir: PathBuf,
}

fn ae_details(m: &AeModel) -> Value {
    json!({
        "initial_loss": m.initial_loss,
        "epoch_losses": m.epoch_losses,
        "rows_used": m.rows_used,
        "rows_skipped": m.rows_skipped,
        "threshold": m.threshold,
        "percentile": m.percentile,
    })
}

fn gan_details(m: &GanModel) -> Value {
    json!({
        "epochs": m.epochs,
        "encoder_losses": m.encoder_losses,
        "rows_used": m.rows_used,
        "lambda": m.lambda,
        "threshold": m.threshold,
        "percentile": m.percentile,
    })
}

fn knn_details(m: &KnnModel) -> Value {
    json!({ "k": m.k, "reference_rows": m.reference.n_rows(), "original_rows": m.original_rows })
}

fn forest_details(m: &ForestModel) -> Value {
    json!({
        "trees": m.trees.len(),
        "depths": m.trees.iter().map(|t| t.depth()).collect::<Vec<_>>(),
        "nodes": m.trees.iter().map(|t| t.nodes.len()).sum::<usize>(),
    })
}

fn cnnlstm_details(m: &CnnLstmModel) -> Value {
    json!({
        "initial_loss": m.initial_loss,
        "epochs": m.epochs,
        "best_epoch": m.best_epoch,
        "best_val_accuracy": m.best_val_accuracy,
        "validation_rows": m.validation_rows,
    })
}

fn ensemble_details(m: &EnsembleModel) -> Value {
    json!({
        "layer1": knn_details(&m.layer1),
        "layer2": cnnlstm_details(&m.layer2),
        "layer3": m.layer3.as_ref().map(forest_details),
        "conflict_count": m.conflict_count,
        "fallback": m.fallback,
    })
}

/// GAN with its threshold percentile chosen on a held-out share of the
/// training split: fit on the rest, then pick the grid percentile (over the
/// fitting rows' normal scores) with the best holdout accuracy.
fn gan_tuned(train: &FeatureMatrix, config: &RunConfig) -> Result<(GanModel, Value), CliError> {
    let (val_idx, fit_idx) = stratified_partition(&train.labels, config.gan_validation_fraction, config.seed);
    let fit = train.select_rows(&fit_idx);
    let val = train.select_rows(&val_idx);
    let mut model = gan_train(&fit, &config.gan_config())?;
    let normal_scores = model.score(&fit.filter_labels(|l| l == 0))?;
    let val_scores = model.score(&val)?;
    let val_attack: Vec<bool> = val.labels.iter().map(|&l| l > 0).collect();
    let (p, theta, acc) = tune_percentile(&normal_scores, &val_scores, &val_attack, &default_percentile_grid())
        .ok_or_else(|| CliError::Usage("threshold tuning needs normal rows and a non-empty holdout".into()))?;
    info!("gan: tuned percentile {p} (threshold {theta:.6}, holdout accuracy {acc:.4})");
    model.threshold = theta;
    model.percentile = p;
    Ok((
        model,
        json!({ "holdout_rows": val.n_rows(), "percentile": p, "threshold": theta, "holdout_accuracy": acc }),
    ))
}

/// Fits the configured model on a transformed training matrix.
pub fn fit_model(train: &FeatureMatrix, config: &RunConfig) -> Result<(TrainedModel, Value), CliError> {
    Ok(match config.model {
        ModelKind::Ae => {
            let m = ae_train(train, &config.ae_config())?;
            let d = ae_details(&m);
            (TrainedModel::Ae(m), d)
        }
        ModelKind::Gan if config.gan_tune_threshold => {
            let (m, tuning) = gan_tuned(train, config)?;
            let mut d = gan_details(&m);
            d["tuning"] = tuning;
            (TrainedModel::Gan(m), d)
        }
        ModelKind::Gan => {
            let m = gan_train(train, &config.gan_config())?;
            let d = gan_details(&m);
            (TrainedModel::Gan(m), d)
        }
        ModelKind::Knn => {
            let m = knn_fit(train, &config.knn_config())?;
            let d = knn_details(&m);
            (TrainedModel::Knn(m), d)
        }
        ModelKind::Rf => {
            let m = forest_fit(train, &config.forest_config())?;
            let d = forest_details(&m);
            (TrainedModel::Rf(m), d)
        }
        ModelKind::Cnnlstm => {
            let m = cnnlstm_train(train, &config.cnnlstm_config())?;
            let d = cnnlstm_details(&m);
            (TrainedModel::Cnnlstm(m), d)
        }
        ModelKind::Ensemble => {
            let m = ensemble_train(train, &config.ensemble_config())?;
            let d = ensemble_details(&m);
            (TrainedModel::Ensemble(m), d)
        }
    })
}

/// Split, preprocess, fit. Writes `bundle/`, `training_log.json` and
/// `resolved_config.txt` under `config.out`.
pub fn cmd_train(config: &RunConfig) -> Result<TrainOutcome, CliError> {
    let splits = prepare_splits(config)?;
    let pre = Preprocessor::fit(&splits.train, config.model.encoding(), config.l2(), config.lenient_categories)?;
    let train = pre.transform(&splits.train)?;
    info!("training {} on {} rows x {} features", config.model, train.n_rows(), train.n_cols());
    let (model, details) = fit_model(&train, config)?;
    let bundle = ModelBundle {
        model,
        preprocessor: pre,
        config_hash: config.hash(),
        dataset_checksum: splits.checksum.clone(),
        config: config.render_portable(),
    };
    let log = TrainingLog {
        model: config.model,
        seed: config.seed,
        config_hash: bundle.config_hash.clone(),
        dataset_checksum: splits.checksum,
        train_rows: splits.train.len(),
        test_rows: splits.test.len(),
        train_counts: splits.train.category_counts(),
        features: train.n_cols(),
        details,
    };
    let bundle_dir = config.out.join(BUNDLE_DIR);
    bundle.save(&bundle_dir)?;
    let mut log_text = serde_json::to_string_pretty(&log).expect("log serializes");
    log_text.push('\n');
    write(&config.out.join(TRAINING_LOG), &log_text)?;
    write(&config.out.join(RESOLVED_CONFIG), &config.render())?;
    Ok(TrainOutcome { bundle, log, bundle_dir })
}

/// Run configuration stored in a bundle, as the base for evaluation.
pub fn bundle_config(bundle_dir: &Path) -> Result<RunConfig, CliError> {
    Ok(RunConfig::from_text(&ModelBundle::manifest(bundle_dir)?.config)?)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalOptions {
    /// Evaluate despite a dataset checksum mismatch.
    pub force: bool,
    /// Re-derive scorer thresholds at this percentile of training normal scores.
    pub threshold_percentile: Option<f64>,
    /// GAN mixing weight override.
    pub lambda: Option<f64>,
}

/// Applies evaluation-time threshold overrides to an anomaly scorer.
fn rethreshold(
    model: &mut TrainedModel,
    pre: &Preprocessor,
    splits: &Splits,
    opts: &EvalOptions,
) -> Result<(), CliError> {
    if opts.threshold_percentile.is_none() && opts.lambda.is_none() {
        return Ok(());
    }
    let normal = pre.transform(&splits.train.filter(|r| r.category == Category::Normal))?;
    match model {
        TrainedModel::Ae(m) => {
            let p = opts.threshold_percentile.unwrap_or(m.percentile);
            let scores = m.score(&normal)?;
            m.threshold = nearest_rank_percentile(&scores, p).unwrap_or(m.threshold);
            m.percentile = p;
        }
        TrainedModel::Gan(m) => {
            if let Some(l) = opts.lambda {
                if !(0.0..=1.0).contains(&l) {
                    return Err(CliError::Usage(format!("lambda {l} outside [0, 1]")));
                }
                m.lambda = l;
            }
            let p = opts.threshold_percentile.unwrap_or(m.percentile);
            let scores = m.score(&normal)?;
            m.threshold = nearest_rank_percentile(&scores, p).unwrap_or(m.threshold);
            m.percentile = p;
        }
        _ => warn!("threshold overrides apply to ae and gan only; ignored"),
    }
    Ok(())
}

pub struct EvalOutcome {
    pub report: EvalReport,
    /// Delta tables against the published figures, when there are any.
    pub reference_tables: Option<String>,
    pub report_path: PathBuf,
}

/// Scores the test split of `config` with the bundle and writes
/// `eval_report.json` under `config.out`.
pub fn cmd_evaluate(bundle_dir: &Path, config: &RunConfig, opts: &EvalOptions) -> Result<EvalOutcome, CliError> {
    let mut bundle = ModelBundle::load(bundle_dir)?;
    if config.lenient_categories {
        bundle.preprocessor.encoder.lenient = true;
    }
    let splits = prepare_splits(config)?;
    if splits.checksum != bundle.dataset_checksum {
        let err = CliError::ChecksumMismatch {
            bundle: bundle.dataset_checksum.clone(),
            data: config.data.display().to_string(),
            found: splits.checksum.clone(),
        };
        if !opts.force {
            return Err(err);
        }
        warn!("{err} (continuing: --force)");
    }
    rethreshold(&mut bundle.model, &bundle.preprocessor, &splits, opts)?;
    let test = bundle.preprocessor.transform(&splits.test)?;
    let mut meta = RunMetadata {
        model: bundle.model.kind().to_string(),
        seed: config.seed,
        config_hash: bundle.config_hash.clone(),
        dataset_checksum: splits.checksum.clone(),
        test_rows: test.n_rows(),
        ..Default::default()
    };
    let truth = &test.labels;
    let report = match &bundle.model {
        TrainedModel::Ae(_) | TrainedModel::Gan(_) => {
            let v = bundle.model.verdicts(&test)?;
            let is_attack: Vec<bool> = truth.iter().map(|&l| l > 0).collect();
            if let (TrainedModel::Gan(m), Some(scores)) = (&bundle.model, &v.scores) {
                meta.notes.insert("lambda".into(), m.lambda.to_string());
                meta.notes.insert("threshold".into(), m.threshold.to_string());
                meta.notes.insert("percentile".into(), m.percentile.to_string());
                add_score_means(&mut meta, scores, &is_attack);
            }
            if let (TrainedModel::Ae(m), Some(scores)) = (&bundle.model, &v.scores) {
                meta.notes.insert("threshold".into(), m.threshold.to_string());
                meta.notes.insert("percentile".into(), m.percentile.to_string());
                add_score_means(&mut meta, scores, &is_attack);
            }
            EvalReport::build_binary(&is_attack, &v.anomalous, meta)?
        }
        TrainedModel::Ensemble(e) => {
            let detail = e.predict_detailed(&test)?;
            let acc = |p: &[usize]| p.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64;
            meta.intermediate_accuracies.insert("layer1_knn".into(), acc(&detail.layer1));
            meta.intermediate_accuracies.insert("layer2_cnnlstm".into(), acc(&detail.layer2));
            meta.notes.insert("agreements".into(), detail.stats.agreements.to_string());
            meta.notes.insert("conflicts".into(), detail.stats.conflicts.to_string());
            meta.notes.insert("layer3_rows".into(), detail.stats.layer3_rows.to_string());
            EvalReport::build(truth, &detail.classes, meta)?
        }
        other => EvalReport::build(truth, &other.verdicts(&test)?.classes, meta)?,
    };
    let report_path = config.out.join(EVAL_REPORT);
    let mut text = report.to_json();
    text.push('\n');
    write(&report_path, &text)?;
    Ok(EvalOutcome {
        reference_tables: report.reference_tables(REFERENCE_TOLERANCE),
        report,
        report_path,
    })
}

fn add_score_means(meta: &mut RunMetadata, scores: &[f64], is_attack: &[bool]) {
    for (name, want) in [("mean_score_normal", false), ("mean_score_attack", true)] {
        let picked: Vec<f64> = scores.iter().zip(is_attack).filter(|(_, &a)| a == want).map(|(&s, _)| s).collect();
        if !picked.is_empty() {
            meta.notes
                .insert(name.into(), (picked.iter().sum::<f64>() / picked.len() as f64).to_string());
        }
    }
}

/// One output line per input record (blank lines are not records):
/// `record<TAB>class<TAB>score<TAB>anomalous`, or
/// `record<TAB>error<TAB>message` when the record cannot be scored. `record`
/// is the 1-based line number; `score` is `-` for classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutput {
    pub lines: Vec<String>,
    pub failed: usize,
}

impl ScoreOutput {
    pub fn into_result(self) -> Result<Vec<String>, (Vec<String>, CliError)> {
        if self.failed == 0 {
            Ok(self.lines)
        } else {
            let total = self.lines.len();
            let failed = self.failed;
            Err((self.lines, CliError::ScoreFailures { failed, total }))
        }
    }
}

/// Scores raw records (labelled or not) with a loaded bundle.
pub fn score_text(bundle: &ModelBundle, text: &str) -> Result<ScoreOutput, CliError> {
    let mut slots: Vec<(usize, Result<usize, String>)> = Vec::new();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let encoded = parse_unlabelled(line, line_no)
            .map_err(|e| e.to_string())
            .and_then(|r| bundle.preprocessor.transform_record(&r).map_err(|e| e.to_string()));
        match encoded {
            Ok(row) => {
                slots.push((line_no, Ok(rows.len())));
                rows.push(row);
            }
            Err(e) => slots.push((line_no, Err(e))),
        }
    }
    let verdicts = if rows.is_empty() {
        None
    } else {
        let m = FeatureMatrix::from_rows(&rows, vec![0; rows.len()])?;
        Some(bundle.model.verdicts(&m)?)
    };
    let scorer = matches!(bundle.model, TrainedModel::Ae(_) | TrainedModel::Gan(_));
    let mut failed = 0;
    let lines = slots
        .into_iter()
        .map(|(line_no, slot)| match slot {
            Ok(r) => {
                let v = verdicts.as_ref().expect("rows were scored");
                let class = if scorer {
                    if v.anomalous[r] { "attack" } else { "normal" }
                } else {
                    Category::from_code(v.classes[r]).map_or("unknown", Category::name)
                };
                let score = v.scores.as_ref().map_or("-".to_string(), |s| format!("{:.9e}", s[r]));
                format!("{line_no}\t{class}\t{score}\t{}", v.anomalous[r])
            }
            Err(e) => {
                failed += 1;
                format!("{line_no}\terror\t{e}")
            }
        })
        .collect();
    Ok(ScoreOutput { lines, failed })
}

/// Reads `input` and scores every record with the bundle at `bundle_dir`.
/// `lenient` overrides the bundle's unseen-category policy when set.
pub fn cmd_score(bundle_dir: &Path, input: &Path, lenient: Option<bool>) -> Result<ScoreOutput, CliError> {
    let mut bundle = ModelBundle::load(bundle_dir)?;
    if let Some(l) = lenient {
        bundle.preprocessor.encoder.lenient = l;
    }
    let (text, _) = crate::kdd::read_text(input)?;
    score_text(&bundle, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Config(ConfigError::UnknownKey("k".into())).exit_code(), 1);
        assert_eq!(
            CliError::Model(ModelError::DivergenceDetected { epoch: 0, loss: f64::NAN }).exit_code(),
            3
        );
        assert_eq!(CliError::ScoreFailures { failed: 1, total: 2 }.exit_code(), 2);
    }

    #[test]
    fn synthetic_source_spec() {
        let ds = load_source(Path::new("synthetic:300:4")).unwrap();
        let planned: usize = crate::synth::label_plan(&SynthConfig::new(300, 4)).iter().map(|(_, n)| n).sum();
        assert_eq!(ds.len(), planned);
        assert!(matches!(load_source(Path::new("synthetic:abc")), Err(CliError::Usage(_))));
    }
}
