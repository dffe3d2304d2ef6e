//! Domain types shared by every other module: probability vectors over
//! object types, objects with ground-truth features, and sensor kinds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Slack allowed on individual components before a vector is rejected.
/// Convex combinations of valid vectors can stray from [0, 1] by an ulp.
const COMPONENT_SLACK: f64 = 1e-12;

/// A probability distribution over the `m` object types.
///
/// This is the single currency for beliefs, reports, posteriors and
/// aggregates; every constructor validates the simplex invariants so that
/// downstream code never sees an unnormalized vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TypeDistribution {
    probs: Vec<f64>,
}

impl TypeDistribution {
    /// Builds a distribution from raw components, validating that each lies
    /// in [0, 1] and that the total mass is 1 within [`SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        for (j, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "component {j} is not finite"
                )));
            }
            if !(-COMPONENT_SLACK..=1.0 + COMPONENT_SLACK).contains(&p) {
                return Err(Error::InvalidDistribution(format!(
                    "component {j} = {p} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// The one-hot vector with unit mass at `type_index` (0-based).
    pub fn one_hot(type_index: usize, m: usize) -> Result<Self> {
        if type_index >= m || m == 0 {
            return Err(Error::TypeIndexOutOfRange {
                index: type_index,
                m,
            });
        }
        let mut probs = vec![0.0; m];
        probs[type_index] = 1.0;
        Ok(Self { probs })
    }

    /// The uniform distribution over `m` types.
    pub fn uniform(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDistribution("zero types".into()));
        }
        Ok(Self {
            probs: vec![1.0 / m as f64; m],
        })
    }

    /// Normalizes a vector of nonnegative weights into a distribution.
    ///
    /// All-zero or negative input is rejected rather than patched.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::DegenerateInput("empty vector".into()));
        }
        if let Some((j, &v)) = raw
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::DegenerateInput(format!(
                "component {j} = {v} is negative or not finite"
            )));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(Error::DegenerateInput(
                "all components are zero".into(),
            ));
        }
        Ok(Self {
            probs: raw.iter().map(|v| v / sum).collect(),
        })
    }

    /// Number of object types `m`.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Component for type `j`. Panics on an out-of-range index.
    pub fn get(&self, j: usize) -> f64 {
        self.probs[j]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.probs.iter().copied()
    }

    /// Index and value of the largest component (lowest index on ties).
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = 0;
        for j in 1..self.probs.len() {
            if self.probs[j] > self.probs[best] {
                best = j;
            }
        }
        (best, self.probs[best])
    }

    /// Floors every component at `floor` and renormalizes.
    ///
    /// Used before logarithmic scoring so a zero component cannot produce an
    /// infinite payoff. After renormalization components sit at or slightly
    /// below `floor` (by a factor 1/(1 + m*floor)), never at zero.
    pub fn clipped(&self, floor: f64) -> Result<Self> {
        if floor <= 0.0 || floor >= 1.0 / self.probs.len() as f64 {
            return Err(Error::Argument(format!(
                "clip floor {floor} must lie in (0, 1/m)"
            )));
        }
        let raw: Vec<f64> = self.probs.iter().map(|&p| p.max(floor)).collect();
        Self::normalize(&raw)
    }
}

impl std::ops::Index<usize> for TypeDistribution {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.probs[j]
    }
}

/// One buried object: identity, ground-truth type index and the categorical
/// feature levels a sensor can perceive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectInstance {
    pub id: String,
    /// Ground-truth type index in 0..m.
    pub true_type: usize,
    /// One level index per feature.
    pub features: Vec<usize>,
}

impl ObjectInstance {
    pub fn new(id: impl Into<String>, true_type: usize, features: Vec<usize>) -> Self {
        Self {
            id: id.into(),
            true_type,
            features,
        }
    }

    /// Checks the type index and feature levels against the scenario shape.
    pub fn validate(&self, m: usize, level_counts: &[usize]) -> Result<()> {
        if self.true_type >= m {
            return Err(Error::TypeIndexOutOfRange {
                index: self.true_type,
                m,
            });
        }
        if self.features.len() != level_counts.len() {
            return Err(Error::Config(format!(
                "object {} has {} features, scenario declares {}",
                self.id,
                self.features.len(),
                level_counts.len()
            )));
        }
        for (i, (&v, &k)) in self.features.iter().zip(level_counts).enumerate() {
            if v >= k {
                return Err(Error::Config(format!(
                    "object {} feature {i} level {v} outside 0..{k}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// The three landmine-detection sensor kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorType {
    /// Metal detector: cheapest, noisiest.
    Md,
    /// Infra-red heat sensor: intermediate cost and noise.
    Ir,
    /// Ground-penetrating radar: most expensive, most accurate.
    Gpr,
}

impl SensorType {
    pub const ALL: [SensorType; 3] = [SensorType::Md, SensorType::Ir, SensorType::Gpr];

    pub fn label(self) -> &'static str {
        match self {
            SensorType::Md => "md",
            SensorType::Ir => "ir",
            SensorType::Gpr => "gpr",
        }
    }
}

impl fmt::Display for SensorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Static attributes of one sensor kind.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorTypeSpec {
    pub sensor_type: SensorType,
    /// Per-feature confusion probability in [0, 1].
    pub noise_level: f64,
    /// Constant cost charged per submitted report.
    pub report_cost: f64,
    /// Fleet size for this kind.
    pub count_available: u32,
}

impl SensorTypeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(Error::Config(format!(
                "{} noise level {} outside [0, 1]",
                self.sensor_type, self.noise_level
            )));
        }
        if self.report_cost < 0.0 || !self.report_cost.is_finite() {
            return Err(Error::Config(format!(
                "{} report cost {} must be nonnegative",
                self.sensor_type, self.report_cost
            )));
        }
        Ok(())
    }
}

/// Which fusion technique produced an aggregate or a metric sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMethod {
    /// Prediction-market aggregation with the payment mechanism.
    Pm,
    /// Two-level Dempster-Shafer combination.
    Ds,
    /// Bayesian information-filter fusion.
    Ddf,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 3] = [FusionMethod::Pm, FusionMethod::Ds, FusionMethod::Ddf];

    pub fn label(self) -> &'static str {
        match self {
            FusionMethod::Pm => "pm",
            FusionMethod::Ds => "ds",
            FusionMethod::Ddf => "ddf",
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}
