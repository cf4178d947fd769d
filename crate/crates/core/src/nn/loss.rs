use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

#[inline]
fn bce_term(p: f64, y: f64) -> (f64, f64) {
    let p = clamp_prob(p);
    let loss = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    // Gradient is evaluated at the clamped probability so saturated outputs
    // still receive a finite, correctly signed signal.
    let grad = -(y / p - (1.0 - y) / (1.0 - p));
    (loss, grad)
}

/// Mean binary cross-entropy over an `n x 1` prediction column, with its
/// gradient w.r.t. the predictions.
pub fn bce_loss(predictions: &Tensor2, labels: &[f64]) -> Result<(f64, Tensor2)> {
    if predictions.cols() != 1 || predictions.rows() != labels.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{}x1 predictions", labels.len()),
            format!("{}x{}", predictions.rows(), predictions.cols()),
        ));
    }
    let n = labels.len();
    if n == 0 {
        return Ok((0.0, Tensor2::zeros(0, 1)));
    }
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (&p, &y) in predictions.data().iter().zip(labels) {
        let (l, g) = bce_term(p, y);
        total += l;
        grad.push(g * scale);
    }
    Ok((total * scale, Tensor2::column(grad)))
}

/// Per-row summed BCE averaged over rows: `mean_i Σ_j bce(p_ij, y_ij)`.
pub fn bce_rowsum_loss(predictions: &Tensor2, targets: &Tensor2) -> Result<(f64, Tensor2)> {
    if predictions.shape() != targets.shape() {
        return Err(Error::shape(
            "bce_rowsum_loss",
            format!("{}x{}", targets.rows(), targets.cols()),
            format!("{}x{}", predictions.rows(), predictions.cols()),
        ));
    }
    let n = predictions.rows();
    if n == 0 {
        return Ok((0.0, Tensor2::zeros(0, predictions.cols())));
    }
    let scale = 1.0 / n as f64;
    let mut total = 0.0;
    let mut grad = Tensor2::zeros(n, predictions.cols());
    for ((g, &p), &y) in grad
        .data_mut()
        .iter_mut()
        .zip(predictions.data())
        .zip(targets.data())
    {
        let (l, d) = bce_term(p, y);
        total += l;
        *g = d * scale;
    }
    Ok((total * scale, grad))
}

/// Percentage of predictions whose thresholded class (`p >= threshold` is
/// positive) equals the label.
pub fn accuracy(predictions: &[f64], labels: &[f64], threshold: f64) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::shape("accuracy", labels.len(), predictions.len()));
    }
    if predictions.is_empty() {
        return Err(Error::Data("accuracy of an empty set".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "accuracy threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p >= threshold) == (y >= 0.5))
        .count();
    Ok(100.0 * correct as f64 / predictions.len() as f64)
}
