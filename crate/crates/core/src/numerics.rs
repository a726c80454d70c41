//! Log-sum-exp primitives.
//!
//! Every soft backup and every OR-composition in the crate funnels through
//! [`soft_maximum`], which evaluates `tau * log(sum_i w_i * exp(x_i / tau))`
//! after subtracting the largest supported `x_i`. Terms with zero weight are
//! dropped, so a weight of zero acts as an exact `-inf` in log space.

/// `tau * log(sum_i w_i exp(x_i / tau))`, max-shifted.
///
/// Returns `-inf` when no term carries positive weight. `tau` must be
/// positive; callers that allow `tau = 0` use [`max_over_support`].
pub fn soft_maximum(values: &[f64], weights: &[f64], tau: f64) -> f64 {
    debug_assert_eq!(values.len(), weights.len());
    debug_assert!(tau > 0.0);
    let shift = max_over_support(values, weights);
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, &w)| w * ((x - shift) / tau).exp())
        .sum();
    shift + tau * sum.ln()
}

/// `log(sum_i exp(x_i))`, max-shifted. `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|&x| (x - shift).exp()).sum();
    shift + sum.ln()
}

/// Largest `x_i` whose weight is positive.
pub fn max_over_support(values: &[f64], weights: &[f64]) -> f64 {
    values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&x, _)| x)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Normalised weights `w_i exp(x_i / tau) / sum_j w_j exp(x_j / tau)`.
///
/// Returns `None` if no weight is positive.
pub fn softmax_weights(values: &[f64], weights: &[f64], tau: f64) -> Option<Vec<f64>> {
    let shift = max_over_support(values, weights);
    if shift == f64::NEG_INFINITY {
        return None;
    }
    let mut out: Vec<f64> = values
        .iter()
        .zip(weights)
        .map(|(&x, &w)| if w > 0.0 { w * ((x - shift) / tau).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Some(out)
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in values.iter().enumerate().skip(1) {
        if x > values[best] {
            best = i;
        }
    }
    best
}

pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
