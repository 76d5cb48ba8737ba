use crate::error::{Error, Result};
use crate::nn::Network;

/// Parameter-wise average weighted by `weights[i] / sum(weights)`.
///
/// Accumulated as a running mean, so identical inputs come back bit-exact.
pub fn fedavg(models: &[&Network], weights: &[f64]) -> Result<Network> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} models with {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    if let Some(i) = models.iter().position(|m| !m.same_shape(models[0])) {
        return Err(Error::Shape(format!("model {i} differs in architecture from model 0")));
    }
    let first = weights
        .iter()
        .position(|&w| w > 0.0)
        .ok_or_else(|| Error::InvalidArgument("all weights are zero".into()))?;
    let mut out = models[first].clone();
    let mut total = weights[first];
    for (m, &w) in models.iter().zip(weights).skip(first + 1) {
        if w == 0.0 {
            continue;
        }
        total += w;
        let t = w / total;
        for (acc, layer) in out.layers.iter_mut().zip(&m.layers) {
            acc.weights.zip_mut_with(&layer.weights, |a, &b| *a += t * (b - *a));
            acc.biases.zip_mut_with(&layer.biases, |a, &b| *a += t * (b - *a));
        }
    }
    Ok(out)
}
