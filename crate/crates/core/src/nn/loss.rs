//! Losses return `(mean loss, gradient w.r.t. the prediction)`.

use super::tensor::{Scalar, Tensor};
use super::NnError;

/// Probabilities are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

fn same_shape<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, context: &'static str) -> Result<(), NnError> {
    if pred.shape() != target.shape() {
        return Err(NnError::ShapeMismatch {
            context,
            expected: format!("{:?}", pred.shape()),
            found: format!("{:?}", target.shape()),
        });
    }
    Ok(())
}

/// Mean squared error over all elements.
pub fn loss_mse<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    same_shape(pred, target, "mse target")?;
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let diff = g.as_f64() - t.as_f64();
        total += diff * diff;
        *g = T::of_f64(2.0 * diff / n);
    }
    Ok((T::of_f64(total / n), grad))
}

/// Binary cross-entropy on probabilities.
pub fn loss_bce<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>), NnError> {
    same_shape(pred, target, "bce target")?;
    let n = pred.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let p = g.as_f64().clamp(BCE_EPS, 1.0 - BCE_EPS);
        let t = t.as_f64();
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        *g = T::of_f64((p - t) / (p * (1.0 - p)) / n);
    }
    Ok((T::of_f64(total / n), grad))
}

/// Sparse categorical cross-entropy on logits `[n, classes]` with integer
/// targets; log-softmax is applied internally.
pub fn loss_sparse_ce<T: Scalar>(logits: &Tensor<T>, targets: &[usize]) -> Result<(T, Tensor<T>), NnError> {
    if logits.rank() != 2 || logits.shape()[0] != targets.len() {
        return Err(NnError::ShapeMismatch {
            context: "sparse cross-entropy",
            expected: format!("[{}, classes]", targets.len()),
            found: format!("{:?}", logits.shape()),
        });
    }
    let classes = logits.shape()[1];
    let n = targets.len().max(1) as f64;
    let mut total = 0.0;
    let mut grad = logits.clone();
    for (row, &t) in grad.data_mut().chunks_exact_mut(classes).zip(targets) {
        if t >= classes {
            return Err(NnError::ShapeMismatch {
                context: "sparse cross-entropy target",
                expected: format!("< {classes}"),
                found: t.to_string(),
            });
        }
        let max = row.iter().map(|v| v.as_f64()).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v.as_f64() - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[t].as_f64();
        for (j, v) in row.iter_mut().enumerate() {
            let p = (v.as_f64() - log_z).exp();
            let onehot = if j == t { 1.0 } else { 0.0 };
            *v = T::of_f64((p - onehot) / n);
        }
    }
    Ok((T::of_f64(total / n), grad))
}

/// Per-row mean squared error between two `[n, d]` tensors.
pub fn row_mse<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Vec<f64> {
    let d = *a.shape().last().unwrap_or(&1);
    a.data()
        .chunks_exact(d.max(1))
        .zip(b.data().chunks_exact(d.max(1)))
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .map(|(&p, &q)| {
                    let e = p.as_f64() - q.as_f64();
                    e * e
                })
                .sum::<f64>()
                / d.max(1) as f64
        })
        .collect()
}
