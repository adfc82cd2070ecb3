//! Deep detectors: autoencoder and GAN anomaly scorers, and the CNN+LSTM
//! sequence classifier.

pub mod ae;
pub mod cnnlstm;
pub mod gan;

pub use ae::{ae_score, ae_train, AeConfig, AeModel};
pub use cnnlstm::{cnnlstm_predict, cnnlstm_train, CnnLstmConfig, CnnLstmModel, EpochRecord};
pub use gan::{gan_score, gan_train, neg_log_d, GanConfig, GanEpoch, GanModel};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{nearest_rank_percentile, ModelError};
use crate::nn::{Sequential, Tensor};
use crate::preprocess::FeatureMatrix;

/// Rows to score per forward pass at inference.
pub(crate) const INFER_CHUNK: usize = 1024;

/// Rows `idx` of `m` as a `[len, cols]` tensor.
pub(crate) fn rows_tensor(m: &FeatureMatrix, idx: &[usize]) -> Tensor<f32> {
    let cols = m.n_cols();
    let mut data = Vec::with_capacity(idx.len() * cols);
    for &i in idx {
        data.extend_from_slice(m.row(i));
    }
    Tensor::from_vec(&[idx.len(), cols], data).expect("row block shape")
}

/// Contiguous row range as a tensor.
pub(crate) fn range_tensor(m: &FeatureMatrix, start: usize, end: usize) -> Tensor<f32> {
    let cols = m.n_cols();
    Tensor::from_vec(&[end - start, cols], m.values()[start * cols..end * cols].to_vec()).expect("row block shape")
}

pub(crate) fn shuffled<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

pub(crate) fn check_width(m: &FeatureMatrix, expected: usize) -> Result<(), ModelError> {
    if m.n_cols() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            found: m.n_cols(),
        });
    }
    Ok(())
}

/// Runs `net` over `m` in fixed-size chunks, handing each output block to `f`.
pub(crate) fn chunked_predict(
    net: &Sequential<f32>,
    m: &FeatureMatrix,
    shape: impl Fn(usize) -> Vec<usize>,
    mut f: impl FnMut(usize, &FeatureMatrix, Tensor<f32>),
) -> Result<(), ModelError> {
    let mut start = 0;
    while start < m.n_rows() {
        let end = (start + INFER_CHUNK).min(m.n_rows());
        let x = range_tensor(m, start, end).reshape(&shape(end - start))?;
        let out = net.predict(&x)?;
        f(start, m, out);
        start = end;
    }
    Ok(())
}

/// Picks the threshold percentile from `grid` that maximises binary accuracy
/// on a labelled validation set, with thresholds taken over `normal_scores`.
/// Ties go to the earliest grid entry. Returns `(percentile, threshold,
/// accuracy)`.
pub fn tune_percentile(
    normal_scores: &[f64],
    val_scores: &[f64],
    val_is_attack: &[bool],
    grid: &[f64],
) -> Option<(f64, f64, f64)> {
    let mut best: Option<(f64, f64, f64)> = None;
    for &p in grid {
        let theta = nearest_rank_percentile(normal_scores, p)?;
        let correct = val_scores
            .iter()
            .zip(val_is_attack)
            .filter(|(&s, &a)| (s > theta) == a)
            .count();
        let acc = correct as f64 / val_scores.len().max(1) as f64;
        if best.is_none_or(|b| acc > b.2) {
            best = Some((p, theta, acc));
        }
    }
    best
}

/// Percentile grid used for threshold tuning: 50, 51, .., 99, then 99.5 and
/// 99.9.
pub fn default_percentile_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (50..100).map(f64::from).collect();
    g.extend([99.5, 99.9]);
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuning_prefers_separating_threshold() {
        let normal: Vec<f64> = (1..=100).map(f64::from).collect();
        let val = [10.0, 50.0, 90.0, 200.0, 300.0];
        let attack = [false, false, false, true, true];
        let (p, theta, acc) = tune_percentile(&normal, &val, &attack, &default_percentile_grid()).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(p, 90.0);
        assert_eq!(theta, 90.0);
    }
}
