//! Three-layer ensemble. Layers 1 and 2 classify every row; where they agree
//! their class stands, and rows on which they conflict are sent to layer 3, a
//! classifier fitted only on the conflicting training rows.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::deep::{cnnlstm_train, CnnLstmConfig, CnnLstmModel};
use crate::model::{Classifier, ModelError};
use crate::preprocess::FeatureMatrix;
use crate::shallow::{forest_fit, knn_fit, ForestConfig, ForestModel, KnnConfig, KnnModel};

/// Used for conflicting rows when layer 3 is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    Layer2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub knn: KnnConfig,
    pub cnnlstm: CnnLstmConfig,
    pub forest: ForestConfig,
    /// Below this many training conflicts layer 3 is not fitted.
    pub min_conflicts: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            knn: KnnConfig::default(),
            cnnlstm: CnnLstmConfig::default(),
            forest: ForestConfig::default(),
            min_conflicts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<A, B, C> {
    pub layer1: A,
    pub layer2: B,
    pub layer3: Option<C>,
    /// Conflicting rows in the training split.
    pub conflict_count: usize,
    pub fallback: Fallback,
}

pub type EnsembleModel = Ensemble<KnnModel, CnnLstmModel, ForestModel>;

/// Per-batch routing counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingStats {
    pub agreements: usize,
    pub conflicts: usize,
    /// Rows handed to layer 3 (0 when it is absent).
    pub layer3_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePrediction {
    pub classes: Vec<usize>,
    pub layer1: Vec<usize>,
    pub layer2: Vec<usize>,
    pub stats: RoutingStats,
}

/// Positions where the two prediction vectors differ.
pub fn conflicts(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| i)
        .collect()
}

impl<A: Classifier, B: Classifier, C: Classifier> Ensemble<A, B, C> {
    /// Assembles an ensemble from trained layers 1 and 2: both predict
    /// `train`, and `fit_layer3` is called on the conflicting rows (with
    /// their true labels) when there are at least `min_conflicts` of them.
    pub fn assemble(
        layer1: A,
        layer2: B,
        train: &FeatureMatrix,
        min_conflicts: usize,
        fit_layer3: impl FnOnce(&FeatureMatrix) -> Result<C, ModelError>,
    ) -> Result<Self, ModelError> {
        let p1 = layer1.predict(train)?;
        let p2 = layer2.predict(train)?;
        let rows = conflicts(&p1, &p2);
        info!("ensemble: {} training conflicts out of {} rows", rows.len(), train.n_rows());
        let layer3 = if rows.is_empty() || rows.len() < min_conflicts {
            if !rows.is_empty() {
                warn!(
                    "ensemble: only {} conflicts (< {min_conflicts}); using layer 2 for conflicting rows",
                    rows.len()
                );
            }
            None
        } else {
            Some(fit_layer3(&train.select_rows(&rows))?)
        };
        Ok(Self {
            layer1,
            layer2,
            layer3,
            conflict_count: rows.len(),
            fallback: Fallback::Layer2,
        })
    }

    pub fn predict_detailed(&self, queries: &FeatureMatrix) -> Result<EnsemblePrediction, ModelError> {
        let layer1 = self.layer1.predict(queries)?;
        let layer2 = self.layer2.predict(queries)?;
        let rows = conflicts(&layer1, &layer2);
        let mut classes = layer1.clone();
        let mut layer3_rows = 0;
        match &self.layer3 {
            Some(l3) if !rows.is_empty() => {
                let routed = l3.predict(&queries.select_rows(&rows))?;
                layer3_rows = rows.len();
                for (&i, c) in rows.iter().zip(routed) {
                    classes[i] = c;
                }
            }
            _ => {
                for &i in &rows {
                    classes[i] = match self.fallback {
                        Fallback::Layer2 => layer2[i],
                    };
                }
            }
        }
        Ok(EnsemblePrediction {
            classes,
            stats: RoutingStats {
                agreements: layer1.len() - rows.len(),
                conflicts: rows.len(),
                layer3_rows,
            },
            layer1,
            layer2,
        })
    }
}

impl<A: Classifier, B: Classifier, C: Classifier> Classifier for Ensemble<A, B, C> {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        Ok(self.predict_detailed(queries)?.classes)
    }
}

/// KNN and CNN+LSTM on the full training split, then a random forest on
/// their conflicts.
pub fn ensemble_train(train: &FeatureMatrix, config: &EnsembleConfig) -> Result<EnsembleModel, ModelError> {
    let knn = knn_fit(train, &config.knn)?;
    info!(
        "ensemble: knn reference rows {} of {}",
        knn.reference.n_rows(),
        knn.original_rows
    );
    let cnn = cnnlstm_train(train, &config.cnnlstm)?;
    let forest_cfg = ForestConfig {
        n_classes: Some(config.cnnlstm.n_classes),
        ..config.forest.clone()
    };
    Ensemble::assemble(knn, cnn, train, config.min_conflicts, |conflicted| {
        forest_fit(conflicted, &forest_cfg)
    })
}

pub fn ensemble_predict<A: Classifier, B: Classifier, C: Classifier>(
    model: &Ensemble<A, B, C>,
    queries: &FeatureMatrix,
) -> Result<Vec<usize>, ModelError> {
    model.predict(queries)
}
