use ndarray::{Array1, Array2, ArrayView2, Zip};

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// `-sum(label_i * ln(prediction_i))`, with predictions clamped at [`LOG_CLAMP`].
pub fn cross_entropy(label: &[f64], prediction: &[f64]) -> Result<f64> {
    if label.len() != prediction.len() {
        return Err(Error::Shape(format!(
            "label has {} entries, prediction {}",
            label.len(),
            prediction.len()
        )));
    }
    Ok(label.iter().zip(prediction).map(|(&l, &p)| term(l, p)).sum())
}

#[inline]
fn term(label: f64, p: f64) -> f64 {
    if label == 0.0 {
        0.0
    } else {
        -label * p.max(LOG_CLAMP).ln()
    }
}

#[inline]
fn term_grad(label: f64, p: f64) -> f64 {
    // The clamp is flat below LOG_CLAMP.
    if label == 0.0 || p <= LOG_CLAMP {
        0.0
    } else {
        -label / p
    }
}

/// Per-row cross entropies of a batch.
pub fn cross_entropy_rows(labels: ArrayView2<'_, f64>, predictions: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    check(&labels, &predictions)?;
    Ok(Zip::from(labels.rows())
        .and(predictions.rows())
        .map_collect(|l, p| l.iter().zip(p).map(|(&l, &p)| term(l, p)).sum()))
}

/// Batch-mean cross entropy and its gradient with respect to the predictions.
pub fn mean_cross_entropy(labels: ArrayView2<'_, f64>, predictions: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    check(&labels, &predictions)?;
    let rows = labels.nrows();
    if rows == 0 {
        return Err(Error::Usage("empty batch".into()));
    }
    let scale = 1.0 / rows as f64;
    let loss = cross_entropy_rows(labels, predictions)?.sum() * scale;
    let mut grad = Array2::zeros(labels.raw_dim());
    Zip::from(&mut grad)
        .and(&labels)
        .and(&predictions)
        .for_each(|g, &l, &p| *g = term_grad(l, p) * scale);
    Ok((loss, grad))
}

/// Batch-mean cross entropy of softmax outputs and its gradient with respect
/// to the softmax logits, `(p * sum(label) - label) / B` per row. Unlike the
/// gradient through the clamped logarithm, it does not vanish for confident
/// wrong predictions.
pub fn softmax_cross_entropy(
    labels: ArrayView2<'_, f64>,
    probabilities: ArrayView2<'_, f64>,
) -> Result<(f64, Array2<f64>)> {
    check(&labels, &probabilities)?;
    let rows = labels.nrows();
    if rows == 0 {
        return Err(Error::Usage("empty batch".into()));
    }
    let scale = 1.0 / rows as f64;
    let loss = cross_entropy_rows(labels, probabilities)?.sum() * scale;
    let mut grad = Array2::zeros(labels.raw_dim());
    for ((mut g, l), p) in grad.rows_mut().into_iter().zip(labels.rows()).zip(probabilities.rows()) {
        let mass = l.sum();
        for ((g, &l), &p) in g.iter_mut().zip(l).zip(p) {
            *g = (p * mass - l) * scale;
        }
    }
    Ok((loss, grad))
}

fn check(labels: &ArrayView2<'_, f64>, predictions: &ArrayView2<'_, f64>) -> Result<()> {
    if labels.dim() != predictions.dim() {
        return Err(Error::Shape(format!(
            "labels {:?} vs predictions {:?}",
            labels.dim(),
            predictions.dim()
        )));
    }
    Ok(())
}

/// One-hot rows for 0-based class indices.
pub fn one_hot(indices: impl IntoIterator<Item = usize>, classes: usize) -> Array2<f64> {
    let indices: Vec<usize> = indices.into_iter().collect();
    let mut out = Array2::zeros((indices.len(), classes));
    for (row, &i) in indices.iter().enumerate() {
        out[[row, i]] = 1.0;
    }
    out
}
