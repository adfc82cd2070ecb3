//! Brute-force k-nearest-neighbours over Euclidean distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kdd::stratified_partition;
use crate::model::{argmax_lowest, Classifier, ModelError};
use crate::preprocess::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distance {
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Reference rows beyond this cap are dropped by seeded stratified
    /// subsampling.
    pub max_reference_rows: Option<usize>,
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_reference_rows: Some(20_000),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub reference: FeatureMatrix,
    pub k: usize,
    pub distance: Distance,
    /// Row count before capping.
    pub original_rows: usize,
}

/// Squared Euclidean distance accumulated in f64.
fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let d = x as f64 - y as f64;
        acc += d * d;
    }
    acc
}

pub fn knn_fit(train: &FeatureMatrix, config: &KnnConfig) -> Result<KnnModel, ModelError> {
    if train.n_rows() == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    let reference = match config.max_reference_rows {
        Some(cap) if cap < train.n_rows() => {
            let fraction = cap as f64 / train.n_rows() as f64;
            let (keep, _) = stratified_partition(&train.labels, fraction, config.seed);
            train.select_rows(&keep)
        }
        _ => train.clone(),
    };
    if config.k == 0 || config.k > reference.n_rows() {
        return Err(ModelError::KTooLarge {
            k: config.k,
            references: reference.n_rows(),
        });
    }
    Ok(KnnModel {
        reference,
        k: config.k,
        distance: Distance::Euclidean,
        original_rows: train.n_rows(),
    })
}

impl KnnModel {
    pub fn new(reference: FeatureMatrix, k: usize) -> Result<Self, ModelError> {
        if k == 0 || k > reference.n_rows() {
            return Err(ModelError::KTooLarge {
                k,
                references: reference.n_rows(),
            });
        }
        let original_rows = reference.n_rows();
        Ok(Self {
            reference,
            k,
            distance: Distance::Euclidean,
            original_rows,
        })
    }

    fn n_classes(&self) -> usize {
        self.reference.labels.iter().max().map_or(1, |m| m + 1)
    }

    /// The k nearest reference rows to `query` as `(distance, index)`,
    /// ordered by distance then index.
    pub fn neighbours(&self, query: &[f32]) -> Vec<(f64, usize)> {
        let k = self.k;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, r) in self.reference.rows().enumerate() {
            let d = squared_distance(query, r);
            if best.len() == k && d >= best[k - 1].0 {
                // Equal distance loses to the earlier (lower) index already kept.
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        best
    }

    fn vote(&self, neighbours: &[(f64, usize)], n_classes: usize) -> usize {
        let mut votes = vec![0usize; n_classes];
        for &(_, i) in neighbours {
            votes[self.reference.labels[i]] += 1;
        }
        argmax_lowest(&votes)
    }
}

/// Majority class among the k nearest references per query.
pub fn knn_predict(model: &KnnModel, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
    if queries.n_cols() != model.reference.n_cols() {
        return Err(ModelError::DimensionMismatch {
            expected: model.reference.n_cols(),
            found: queries.n_cols(),
        });
    }
    let n_classes = model.n_classes();
    Ok((0..queries.n_rows())
        .into_par_iter()
        .map(|q| model.vote(&model.neighbours(queries.row(q)), n_classes))
        .collect())
}

impl Classifier for KnnModel {
    fn predict(&self, queries: &FeatureMatrix) -> Result<Vec<usize>, ModelError> {
        knn_predict(self, queries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f32]], labels: &[usize]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), labels.to_vec()).unwrap()
    }

    #[test]
    fn single_reference_decides_everything() {
        let m = KnnModel::new(matrix(&[&[0.0, 0.0]], &[3]), 1).unwrap();
        let q = matrix(&[&[5.0, -1.0], &[100.0, 2.0]], &[0, 0]);
        assert_eq!(knn_predict(&m, &q).unwrap(), vec![3, 3]);
    }

    #[test]
    fn two_votes_beat_one() {
        // distances^2 from (0.4, 0.4): 0.32, 0.72, 42.32
        let m = KnnModel::new(matrix(&[&[0.0, 0.0], &[1.0, 1.0], &[5.0, 5.0]], &[0, 0, 1]), 3).unwrap();
        let q = matrix(&[&[0.4, 0.4]], &[0]);
        assert_eq!(knn_predict(&m, &q).unwrap(), vec![0]);
    }

    #[test]
    fn distance_ties_prefer_lower_index() {
        // Both references at distance 1; k = 1 keeps index 0.
        let m = KnnModel::new(matrix(&[&[1.0], &[-1.0]], &[2, 1]), 1).unwrap();
        assert_eq!(knn_predict(&m, &matrix(&[&[0.0]], &[0])).unwrap(), vec![2]);
        let swapped = KnnModel::new(matrix(&[&[-1.0], &[1.0]], &[1, 2]), 1).unwrap();
        assert_eq!(knn_predict(&swapped, &matrix(&[&[0.0]], &[0])).unwrap(), vec![1]);
    }

    #[test]
    fn vote_ties_prefer_lower_class() {
        let m = KnnModel::new(matrix(&[&[1.0], &[2.0]], &[4, 1]), 2).unwrap();
        assert_eq!(knn_predict(&m, &matrix(&[&[0.0]], &[0])).unwrap(), vec![1]);
    }

    #[test]
    fn errors() {
        let refs = matrix(&[&[1.0, 2.0]], &[0]);
        assert_eq!(
            KnnModel::new(refs.clone(), 2).unwrap_err(),
            ModelError::KTooLarge { k: 2, references: 1 }
        );
        let m = KnnModel::new(refs, 1).unwrap();
        assert_eq!(
            knn_predict(&m, &matrix(&[&[1.0, 2.0, 3.0]], &[0])).unwrap_err(),
            ModelError::DimensionMismatch { expected: 2, found: 3 }
        );
    }

    #[test]
    fn cap_subsamples_per_class() {
        let rows: Vec<Vec<f32>> = (0..100).map(|i| vec![i as f32]).collect();
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 80)).collect();
        let train = FeatureMatrix::from_rows(&rows, labels).unwrap();
        let cfg = KnnConfig {
            k: 3,
            max_reference_rows: Some(10),
            seed: 1,
        };
        let m = knn_fit(&train, &cfg).unwrap();
        assert_eq!(m.reference.n_rows(), 10);
        assert_eq!(m.reference.labels.iter().filter(|&&l| l == 1).count(), 2);
        assert_eq!(m.original_rows, 100);
        assert_eq!(knn_fit(&train, &cfg).unwrap(), m);
    }
}
