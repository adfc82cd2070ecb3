use thiserror::Error;

use crate::nn::NnError;
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    DivergenceDetected { epoch: usize, loss: f64 },
    #[error("expected {expected} feature columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k = {k} exceeds the {references} reference rows")]
    KTooLarge { k: usize, references: usize },
    #[error("forest has no trees")]
    EmptyForest,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

impl ModelError {
    /// Maps a non-finite forward/backward pass during training to a
    /// divergence error.
    pub(crate) fn during_training(e: NnError, epoch: usize) -> Self {
        match e {
            NnError::NonFinite { .. } => ModelError::DivergenceDetected {
                epoch,
                loss: f64::NAN,
            },
            other => ModelError::Nn(other),
        }
    }
}

/// Multi-class predictor over preprocessed rows.
pub trait Classifier {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError>;
}

impl<C: Classifier + ?Sized> Classifier for &C {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        (**self).predict(queries)
    }
}

/// Real-valued anomaly score with a decision threshold. Higher scores are
/// more anomalous; a row is anomalous iff `score > threshold`.
pub trait AnomalyScorer {
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>, ModelError>;

    fn threshold(&self) -> f64;

    fn classify(&self, rows: &FeatureMatrix) -> Result<Vec<bool>, ModelError> {
        let t = self.threshold();
        Ok(self.score(rows)?.into_iter().map(|s| s > t).collect())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Nearest-rank percentile: the value at rank `ceil(p / 100 * n)` of the
/// sorted sample (rank clamped to `1..=n`).
pub fn nearest_rank_percentile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Some(sorted[rank - 1])
}
