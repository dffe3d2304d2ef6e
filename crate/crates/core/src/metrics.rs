//! Evaluation metrics shared by every fusion method.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{FusionMethod, TypeDistribution};

/// Floor on the mean squared error before the NMSE logarithm.
pub const MSE_FLOOR: f64 = 1e-12;

/// Default smoothing constant for KL divergence against one-hot truths.
pub const KL_EPSILON: f64 = 1e-6;

/// One row of per-step evaluation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSample {
    pub time: u32,
    pub method: FusionMethod,
    pub rmse: f64,
    pub nmse_db: f64,
    pub kl: f64,
}

/// Root mean square error: the Euclidean distance scaled by 1/sqrt(m).
pub fn rmse(est: &TypeDistribution, truth: &TypeDistribution) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    let sq: f64 = est
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sq.sqrt() / (est.len() as f64).sqrt())
}

/// Normed mean squared error in decibels: 10*log10 of the MSE over the
/// variance of the truth vector. The MSE is floored at [`MSE_FLOOR`] so a
/// perfect estimate yields a large negative value instead of -inf.
pub fn nmse_db(est: &TypeDistribution, truth: &TypeDistribution) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    let m = est.len() as f64;
    let mse: f64 = est
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / m;
    let mean = truth.iter().sum::<f64>() / m;
    let variance = truth.iter().map(|v| v * v).sum::<f64>() / m - mean * mean;
    if variance <= 0.0 {
        return Err(Error::Argument(
            "truth vector has zero variance".into(),
        ));
    }
    Ok(10.0 * (mse.max(MSE_FLOOR) / variance).log10())
}

/// Kullback-Leibler divergence D(est || truth) with epsilon smoothing:
/// both arguments get `epsilon` added componentwise and are renormalized,
/// keeping the result finite against one-hot truths.
pub fn kl_divergence(
    est: &TypeDistribution,
    truth: &TypeDistribution,
    epsilon: f64,
) -> Result<f64> {
    if est.len() != truth.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            est.len(),
            truth.len()
        )));
    }
    if epsilon <= 0.0 {
        return Err(Error::Argument(format!(
            "smoothing epsilon {epsilon} must be positive"
        )));
    }
    let smooth = |d: &TypeDistribution| -> Vec<f64> {
        let total = 1.0 + epsilon * d.len() as f64;
        d.iter().map(|p| (p + epsilon) / total).collect()
    };
    let p = smooth(est);
    let q = smooth(truth);
    Ok(p.iter()
        .zip(&q)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum())
}
