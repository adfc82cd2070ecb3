//! On-disk model bundles: a directory holding `manifest.json` and
//! `tensors.bin`. Ensembles nest one sub-bundle per layer (`layer1/`,
//! `layer2/`, optionally `layer3/`).
//!
//! `tensors.bin` is a concatenation of records
//! `u32 name_len | name | u32 rank | u64 dims[rank] | f32 data[..]`, all
//! little-endian. The manifest lists each record's byte offset. Bundles carry
//! no timestamps, so equal inputs give byte-identical bundles.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::ModelKind;
use crate::deep::{AeModel, CnnLstmModel, GanModel};
use crate::ensemble::{Ensemble, EnsembleModel, Fallback};
use crate::model::{AnomalyScorer, Classifier, ModelError};
use crate::nn::{LayerSpec, Sequential, Tensor};
use crate::preprocess::{FeatureMatrix, Preprocessor};
use crate::shallow::{DecisionTree, ForestConfig, ForestModel, KnnModel, Node};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TENSOR_FILE: &str = "tensors.bin";

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bundle I/O at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("malformed tensor file at byte {offset}: {reason}")]
    Tensors { offset: usize, reason: String },
    #[error("tensor `{0}` missing from bundle")]
    MissingTensor(String),
    #[error("unsupported bundle format version {0}")]
    Version(u32),
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Named f32 tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorStore {
    entries: Vec<(String, Vec<usize>, Vec<f32>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

impl TensorStore {
    pub fn push(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.entries.push((name.into(), shape.to_vec(), data));
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, t: &Tensor<f32>) {
        self.push(name, t.shape(), t.data().to_vec());
    }

    pub fn push_net(&mut self, prefix: &str, net: &Sequential<f32>) {
        for (name, t) in net.named_params(prefix) {
            self.push_tensor(name, t);
        }
    }

    pub fn get(&self, name: &str) -> Result<(&[usize], &[f32]), BundleError> {
        self.entries
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|(_, s, d)| (s.as_slice(), d.as_slice()))
            .ok_or_else(|| BundleError::MissingTensor(name.to_string()))
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor<f32>> {
        let (shape, data) = self.get(name).ok()?;
        Tensor::from_vec(shape, data.to_vec()).ok()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _, _)| n.as_str())
    }

    /// Serialises every record; returns the bytes and the manifest index.
    pub fn encode(&self) -> (Vec<u8>, Vec<TensorEntry>) {
        let mut out = Vec::new();
        let mut index = Vec::with_capacity(self.entries.len());
        for (name, shape, data) in &self.entries {
            index.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset: out.len() as u64,
            });
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        (out, index)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, BundleError> {
        let mut at = 0usize;
        let take = |n: usize, at: &mut usize| -> Result<&[u8], BundleError> {
            let end = at.checked_add(n).filter(|&e| e <= bytes.len()).ok_or(BundleError::Tensors {
                offset: *at,
                reason: format!("need {n} more bytes"),
            })?;
            let s = &bytes[*at..end];
            *at = end;
            Ok(s)
        };
        let mut entries = Vec::new();
        while at < bytes.len() {
            let start = at;
            let name_len = u32::from_le_bytes(take(4, &mut at)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(take(name_len, &mut at)?)
                .map_err(|_| BundleError::Tensors {
                    offset: start,
                    reason: "tensor name is not UTF-8".into(),
                })?
                .to_string();
            let rank = u32::from_le_bytes(take(4, &mut at)?.try_into().unwrap()) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(take(8, &mut at)?.try_into().unwrap()) as usize);
            }
            let n: usize = shape.iter().product();
            let raw = take(n.checked_mul(4).unwrap_or(usize::MAX), &mut at)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            entries.push((name, shape, data));
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub architecture: Value,
    /// Present on the top-level bundle only.
    pub preprocessing: Option<Preprocessor>,
    pub thresholds: BTreeMap<String, f64>,
    pub config_hash: String,
    pub dataset_checksum: String,
    /// Resolved run configuration in key-value form, output path excluded.
    pub config: String,
    pub tensors: Vec<TensorEntry>,
    /// Sub-bundle directory names, in layer order.
    pub children: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Ae(AeModel),
    Gan(GanModel),
    Knn(KnnModel),
    Rf(ForestModel),
    Cnnlstm(CnnLstmModel),
    Ensemble(EnsembleModel),
}

/// Per-row output of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdicts {
    /// Predicted class code. Anomaly scorers predict 0 (normal) or 1 (attack).
    pub classes: Vec<usize>,
    /// Anomaly scores, for scorers only.
    pub scores: Option<Vec<f64>>,
    pub anomalous: Vec<bool>,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Ae(_) => ModelKind::Ae,
            TrainedModel::Gan(_) => ModelKind::Gan,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Rf(_) => ModelKind::Rf,
            TrainedModel::Cnnlstm(_) => ModelKind::Cnnlstm,
            TrainedModel::Ensemble(_) => ModelKind::Ensemble,
        }
    }

    pub fn verdicts(&self, rows: &FeatureMatrix) -> Result<Verdicts, ModelError> {
        let scored = |s: &dyn AnomalyScorer| -> Result<Verdicts, ModelError> {
            let scores = s.score(rows)?;
            let t = s.threshold();
            let anomalous: Vec<bool> = scores.iter().map(|&v| v > t).collect();
            Ok(Verdicts {
                classes: anomalous.iter().map(|&a| a as usize).collect(),
                scores: Some(scores),
                anomalous,
            })
        };
        let classified = |c: &dyn Classifier| -> Result<Verdicts, ModelError> {
            let classes = c.predict(rows)?;
            Ok(Verdicts {
                anomalous: classes.iter().map(|&c| c > 0).collect(),
                classes,
                scores: None,
            })
        };
        match self {
            TrainedModel::Ae(m) => scored(m),
            TrainedModel::Gan(m) => scored(m),
            TrainedModel::Knn(m) => classified(m),
            TrainedModel::Rf(m) => classified(m),
            TrainedModel::Cnnlstm(m) => classified(m),
            TrainedModel::Ensemble(m) => classified(m),
        }
    }

    fn thresholds(&self) -> BTreeMap<String, f64> {
        let mut t = BTreeMap::new();
        match self {
            TrainedModel::Ae(m) => {
                t.insert("threshold".into(), m.threshold);
                t.insert("percentile".into(), m.percentile);
            }
            TrainedModel::Gan(m) => {
                t.insert("threshold".into(), m.threshold);
                t.insert("percentile".into(), m.percentile);
                t.insert("lambda".into(), m.lambda);
            }
            _ => {}
        }
        t
    }

    /// Architecture descriptor, tensors, and child models.
    fn describe(&self) -> (Value, TensorStore, Vec<(&'static str, TrainedModel)>) {
        let mut store = TensorStore::default();
        let mut children = Vec::new();
        let arch = match self {
            TrainedModel::Ae(m) => {
                store.push_net("net", &m.net);
                json!({ "n_features": m.n_features, "net": m.net.specs() })
            }
            TrainedModel::Gan(m) => {
                store.push_net("generator", &m.generator);
                store.push_net("discriminator", &m.discriminator);
                if let Some(e) = &m.encoder {
                    store.push_net("encoder", e);
                }
                json!({
                    "n_features": m.n_features,
                    "latent": m.latent,
                    "generator": m.generator.specs(),
                    "discriminator": m.discriminator.specs(),
                    "encoder": m.encoder.as_ref().map(Sequential::specs),
                })
            }
            TrainedModel::Knn(m) => {
                let r = &m.reference;
                store.push("reference", &[r.n_rows(), r.n_cols()], r.values().to_vec());
                store.push("labels", &[r.n_rows()], r.labels.iter().map(|&l| l as f32).collect());
                json!({ "k": m.k, "distance": m.distance, "original_rows": m.original_rows, "columns": r.columns })
            }
            TrainedModel::Rf(m) => {
                let width = 5 + m.n_classes;
                let mut table = Vec::new();
                let mut sizes = Vec::with_capacity(m.trees.len());
                for tree in &m.trees {
                    sizes.push(tree.nodes.len());
                    for node in &tree.nodes {
                        let mut row = vec![0.0f32; width];
                        match node {
                            Node::Split {
                                feature,
                                threshold,
                                left,
                                right,
                            } => {
                                row[1] = *feature as f32;
                                row[2] = *threshold;
                                row[3] = *left as f32;
                                row[4] = *right as f32;
                            }
                            Node::Leaf { histogram } => {
                                row[0] = 1.0;
                                for (c, &h) in histogram.iter().enumerate() {
                                    row[5 + c] = h as f32;
                                }
                            }
                        }
                        table.extend(row);
                    }
                }
                store.push("nodes", &[sizes.iter().sum(), width], table);
                json!({
                    "n_classes": m.n_classes,
                    "n_features": m.n_features,
                    "tree_sizes": sizes,
                    "node_columns": "is_leaf,feature,threshold,left,right,histogram...",
                    "config": m.config,
                })
            }
            TrainedModel::Cnnlstm(m) => {
                store.push_net("net", &m.net);
                json!({
                    "seq_len": m.seq_len,
                    "n_classes": m.n_classes,
                    "best_epoch": m.best_epoch,
                    "best_val_accuracy": m.best_val_accuracy,
                    "net": m.net.specs(),
                })
            }
            TrainedModel::Ensemble(e) => {
                children.push(("layer1", TrainedModel::Knn(e.layer1.clone())));
                children.push(("layer2", TrainedModel::Cnnlstm(e.layer2.clone())));
                if let Some(l3) = &e.layer3 {
                    children.push(("layer3", TrainedModel::Rf(l3.clone())));
                }
                json!({
                    "conflict_count": e.conflict_count,
                    "fallback": e.fallback,
                    "layer3": e.layer3.is_some(),
                })
            }
        };
        (arch, store, children)
    }
}

/// A trained model with everything needed to score raw records.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: TrainedModel,
    pub preprocessor: Preprocessor,
    pub config_hash: String,
    pub dataset_checksum: String,
    pub config: String,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BundleError> {
    fs::write(path, bytes).map_err(io(path))
}

fn save_model(
    dir: &Path,
    model: &TrainedModel,
    preprocessing: Option<&Preprocessor>,
    meta: &ModelBundle,
) -> Result<(), BundleError> {
    fs::create_dir_all(dir).map_err(io(dir))?;
    let (architecture, store, children) = model.describe();
    let (bytes, tensors) = store.encode();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        model_kind: model.kind(),
        architecture,
        preprocessing: preprocessing.cloned(),
        thresholds: model.thresholds(),
        config_hash: meta.config_hash.clone(),
        dataset_checksum: meta.dataset_checksum.clone(),
        config: meta.config.clone(),
        tensors,
        children: children.iter().map(|(n, _)| n.to_string()).collect(),
    };
    write_file(&dir.join(TENSOR_FILE), &bytes)?;
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    for (name, child) in &children {
        save_model(&dir.join(name), child, None, meta)?;
    }
    Ok(())
}

fn field<T: serde::de::DeserializeOwned>(arch: &Value, key: &str) -> Result<T, BundleError> {
    let v = arch
        .get(key)
        .ok_or_else(|| BundleError::Inconsistent(format!("architecture lacks `{key}`")))?;
    Ok(T::deserialize(v)?)
}

fn load_net(store: &TensorStore, arch: &Value, key: &str, prefix: &str) -> Result<Sequential<f32>, BundleError> {
    let specs: Vec<LayerSpec> = field(arch, key)?;
    Sequential::from_named(&specs, prefix, |n| store.tensor(n)).map_err(|e| BundleError::Model(e.into()))
}

fn threshold(m: &Manifest, key: &str) -> Result<f64, BundleError> {
    m.thresholds
        .get(key)
        .copied()
        .ok_or_else(|| BundleError::Inconsistent(format!("thresholds lack `{key}`")))
}

fn as_index(v: f32, what: &str) -> Result<usize, BundleError> {
    if v >= 0.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(BundleError::Inconsistent(format!("{what} {v} is not an index")))
    }
}

fn read_manifest(dir: &Path) -> Result<(Manifest, TensorStore), BundleError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io(&path))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(BundleError::Version(manifest.format_version));
    }
    let path = dir.join(TENSOR_FILE);
    let store = TensorStore::decode(&fs::read(&path).map_err(io(&path))?)?;
    Ok((manifest, store))
}

fn load_model(dir: &Path) -> Result<(Manifest, TrainedModel), BundleError> {
    let (m, store) = read_manifest(dir)?;
    let arch = &m.architecture;
    let model = match m.model_kind {
        ModelKind::Ae => {
            let net = load_net(&store, arch, "net", "net")?;
            TrainedModel::Ae(AeModel {
                net,
                threshold: threshold(&m, "threshold")?,
                percentile: threshold(&m, "percentile")?,
                n_features: field(arch, "n_features")?,
                initial_loss: f64::NAN,
                epoch_losses: Vec::new(),
                rows_used: 0,
                rows_skipped: 0,
            })
        }
        ModelKind::Gan => {
            let has_encoder = !arch.get("encoder").is_none_or(Value::is_null);
            TrainedModel::Gan(GanModel {
                generator: load_net(&store, arch, "generator", "generator")?,
                discriminator: load_net(&store, arch, "discriminator", "discriminator")?,
                encoder: if has_encoder {
                    Some(load_net(&store, arch, "encoder", "encoder")?)
                } else {
                    None
                },
                latent: field(arch, "latent")?,
                n_features: field(arch, "n_features")?,
                lambda: threshold(&m, "lambda")?,
                threshold: threshold(&m, "threshold")?,
                percentile: threshold(&m, "percentile")?,
                epochs: Vec::new(),
                encoder_losses: Vec::new(),
                rows_used: 0,
            })
        }
        ModelKind::Knn => {
            let (shape, values) = store.get("reference")?;
            let (_, labels) = store.get("labels")?;
            let labels = labels
                .iter()
                .map(|&l| as_index(l, "label"))
                .collect::<Result<Vec<_>, _>>()?;
            let [rows, cols] = shape else {
                return Err(BundleError::Inconsistent("reference must be a matrix".into()));
            };
            let reference = FeatureMatrix::new(values.to_vec(), *rows, *cols, labels, field(arch, "columns")?)
                .map_err(|e| BundleError::Inconsistent(e.to_string()))?;
            let mut knn = KnnModel::new(reference, field(arch, "k")?)?;
            knn.original_rows = field(arch, "original_rows")?;
            knn.distance = field(arch, "distance")?;
            TrainedModel::Knn(knn)
        }
        ModelKind::Rf => {
            let n_classes: usize = field(arch, "n_classes")?;
            let sizes: Vec<usize> = field(arch, "tree_sizes")?;
            let (shape, table) = store.get("nodes")?;
            let width = 5 + n_classes;
            if shape != [sizes.iter().sum::<usize>(), width] {
                return Err(BundleError::Inconsistent("node table shape".into()));
            }
            let mut rows = table.chunks_exact(width);
            let mut trees = Vec::with_capacity(sizes.len());
            for size in sizes {
                let mut nodes = Vec::with_capacity(size);
                for row in rows.by_ref().take(size) {
                    nodes.push(if row[0] == 1.0 {
                        Node::Leaf {
                            histogram: row[5..].iter().map(|&h| h as u32).collect(),
                        }
                    } else {
                        let (left, right) = (as_index(row[3], "child")?, as_index(row[4], "child")?);
                        if left >= size || right >= size {
                            return Err(BundleError::Inconsistent("child index out of range".into()));
                        }
                        Node::Split {
                            feature: as_index(row[1], "feature")?,
                            threshold: row[2],
                            left,
                            right,
                        }
                    });
                }
                trees.push(DecisionTree { nodes });
            }
            let config: ForestConfig = field(arch, "config")?;
            TrainedModel::Rf(ForestModel {
                trees,
                n_classes,
                n_features: field(arch, "n_features")?,
                config,
            })
        }
        ModelKind::Cnnlstm => TrainedModel::Cnnlstm(CnnLstmModel {
            net: load_net(&store, arch, "net", "net")?,
            seq_len: field(arch, "seq_len")?,
            n_classes: field(arch, "n_classes")?,
            best_epoch: field(arch, "best_epoch")?,
            best_val_accuracy: field(arch, "best_val_accuracy")?,
            initial_loss: f64::NAN,
            epochs: Vec::new(),
            validation_rows: 0,
        }),
        ModelKind::Ensemble => {
            let child = |name: &str| load_model(&dir.join(name)).map(|(_, model)| model);
            let TrainedModel::Knn(layer1) = child("layer1")? else {
                return Err(BundleError::Inconsistent("layer1 must be knn".into()));
            };
            let TrainedModel::Cnnlstm(layer2) = child("layer2")? else {
                return Err(BundleError::Inconsistent("layer2 must be cnnlstm".into()));
            };
            let layer3 = if field::<bool>(arch, "layer3")? {
                match child("layer3")? {
                    TrainedModel::Rf(f) => Some(f),
                    _ => return Err(BundleError::Inconsistent("layer3 must be rf".into())),
                }
            } else {
                None
            };
            let fallback: Fallback = field(arch, "fallback")?;
            TrainedModel::Ensemble(Ensemble {
                layer1,
                layer2,
                layer3,
                conflict_count: field(arch, "conflict_count")?,
                fallback,
            })
        }
    };
    Ok((m, model))
}

impl ModelBundle {
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), BundleError> {
        let dir = dir.as_ref();
        if dir.exists() {
            // Stale sub-bundles (e.g. an old layer3/) must not survive.
            fs::remove_dir_all(dir).map_err(io(dir))?;
        }
        save_model(dir, &self.model, Some(&self.preprocessor), self)
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self, BundleError> {
        let (manifest, model) = load_model(dir.as_ref())?;
        let preprocessor = manifest
            .preprocessing
            .ok_or_else(|| BundleError::Inconsistent("top-level bundle lacks preprocessing state".into()))?;
        Ok(Self {
            model,
            preprocessor,
            config_hash: manifest.config_hash,
            dataset_checksum: manifest.dataset_checksum,
            config: manifest.config,
        })
    }

    pub fn manifest(dir: impl AsRef<Path>) -> Result<Manifest, BundleError> {
        Ok(read_manifest(dir.as_ref())?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_records_round_trip() {
        let mut s = TensorStore::default();
        s.push("a", &[2, 3], (0..6).map(|v| v as f32 * 0.5).collect());
        s.push("scalarish", &[1], vec![f32::MIN_POSITIVE]);
        s.push("empty", &[0, 4], vec![]);
        let (bytes, index) = s.encode();
        assert_eq!(TensorStore::decode(&bytes).unwrap(), s);
        assert_eq!(index[0].offset, 0);
        // 4 + 1 + 4 + 2*8 + 6*4
        assert_eq!(index[1].offset, 49);
    }

    #[test]
    fn layout_is_little_endian() {
        let mut s = TensorStore::default();
        s.push("w", &[1], vec![1.0]);
        let (bytes, _) = s.encode();
        let mut expected = vec![1, 0, 0, 0, b'w', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0];
        expected.extend_from_slice(&1.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_tensor_file_is_rejected() {
        let mut s = TensorStore::default();
        s.push("w", &[3], vec![1.0, 2.0, 3.0]);
        let (bytes, _) = s.encode();
        assert!(matches!(
            TensorStore::decode(&bytes[..bytes.len() - 1]),
            Err(BundleError::Tensors { .. })
        ));
    }

    #[test]
    fn forest_round_trips_through_node_table() {
        let rows: Vec<Vec<f32>> = (0..40).map(|i| vec![i as f32, (i % 3) as f32]).collect();
        let labels = (0..40).map(|i| usize::from(i >= 20) + usize::from(i % 3 == 0)).collect();
        let m = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let forest = crate::shallow::forest_fit(
            &m,
            &ForestConfig {
                n_trees: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("forest-bundle-{}", std::process::id()));
        let meta = ModelBundle {
            model: TrainedModel::Rf(forest.clone()),
            preprocessor: dummy_preprocessor(),
            config_hash: "h".into(),
            dataset_checksum: "c".into(),
            config: String::new(),
        };
        meta.save(&dir).unwrap();
        let back = ModelBundle::load(&dir).unwrap();
        assert_eq!(back.model, TrainedModel::Rf(forest));
        assert_eq!(ModelBundle::manifest(&dir).unwrap().tensors[0].name, "nodes");
        fs::remove_dir_all(&dir).unwrap();
    }

    fn dummy_preprocessor() -> Preprocessor {
        let ds = crate::synth::generate_dataset(&crate::synth::SynthConfig::new(200, 1)).unwrap();
        Preprocessor::fit(&ds, crate::preprocess::EncodingKind::Label, false, false).unwrap()
    }
}
