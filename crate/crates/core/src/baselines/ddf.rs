//! Recursive Bayesian information-filter baseline: the posterior is
//! multiplied by each incoming likelihood and renormalized.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::TypeDistribution;

/// Running state of the information filter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterState {
    pub posterior: TypeDistribution,
    pub updates_applied: u32,
}

impl FilterState {
    pub fn new(prior: TypeDistribution) -> Self {
        Self {
            posterior: prior,
            updates_applied: 0,
        }
    }
}

/// One multiplicative update: posterior' proportional to posterior times
/// likelihood.
pub fn ddf_update(state: &FilterState, likelihood: &TypeDistribution) -> Result<FilterState> {
    if likelihood.len() != state.posterior.len() {
        return Err(Error::Argument(format!(
            "likelihood length {} differs from posterior length {}",
            likelihood.len(),
            state.posterior.len()
        )));
    }
    let product: Vec<f64> = state
        .posterior
        .iter()
        .zip(likelihood.iter())
        .map(|(p, l)| p * l)
        .collect();
    let posterior = TypeDistribution::normalize(&product).map_err(|_| {
        Error::DegenerateInput("posterior-likelihood product vanished everywhere".into())
    })?;
    Ok(FilterState {
        posterior,
        updates_applied: state.updates_applied + 1,
    })
}
