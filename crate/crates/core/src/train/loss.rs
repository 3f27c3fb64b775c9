use crate::{Result, SadError};

/// Probability clamp applied before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy over frames.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(SadError::InvalidShape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(SadError::InvalidShape("empty prediction vector".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / predictions.len() as f64)
}
