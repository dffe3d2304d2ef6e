//! Generative signal model and the Bayesian posterior available to agents.
//!
//! A sensor reading is a vector of categorical feature levels. Each reading
//! equals the object's true level with probability `1 - noise_level`,
//! otherwise a uniformly random other level. Agents never see the raw
//! generative process; they invert signals through a conditional type table
//! built from per-sensor, per-type likelihoods (naive-Bayes factorization
//! across features).

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ObjectInstance, SensorType, SensorTypeSpec, TypeDistribution};

/// One noisy observation of an object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Signal {
    /// One perceived level per feature.
    pub values: Vec<usize>,
    pub sensor_type: SensorType,
    /// Time step at which the signal was (or will be) perceived.
    pub time: u32,
}

/// Per-feature likelihoods for one sensor kind:
/// `tables[feature][type][level]` is the probability of perceiving `level`
/// for `feature` when the object has the given type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLikelihoods {
    pub tables: Vec<Vec<Vec<f64>>>,
}

impl FeatureLikelihoods {
    pub fn validate(&self, m: usize, level_counts: &[usize]) -> Result<()> {
        if self.tables.len() != level_counts.len() {
            return Err(Error::Config(format!(
                "likelihoods cover {} features, scenario declares {}",
                self.tables.len(),
                level_counts.len()
            )));
        }
        for (i, per_type) in self.tables.iter().enumerate() {
            if per_type.len() != m {
                return Err(Error::Config(format!(
                    "likelihood feature {i} covers {} types, expected {m}",
                    per_type.len()
                )));
            }
            for (j, row) in per_type.iter().enumerate() {
                if row.len() != level_counts[i] {
                    return Err(Error::Config(format!(
                        "likelihood feature {i} type {j} has {} levels, expected {}",
                        row.len(),
                        level_counts[i]
                    )));
                }
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Config(format!(
                        "likelihood feature {i} type {j} has entries outside [0, 1]"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "likelihood feature {i} type {j} sums to {sum}, expected 1"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Complete lookup table of the posterior P(type | signal) for one sensor
/// kind, covering every signal combination.
#[derive(Debug, Clone)]
pub struct ConditionalTypeTable {
    level_counts: Vec<usize>,
    strides: Vec<usize>,
    entries: Vec<TypeDistribution>,
}

impl ConditionalTypeTable {
    /// Builds the full table from a prior and factorized likelihoods.
    pub fn from_likelihoods(
        prior: &TypeDistribution,
        level_counts: &[usize],
        likelihoods: &FeatureLikelihoods,
    ) -> Result<Self> {
        let m = prior.len();
        likelihoods.validate(m, level_counts)?;
        if level_counts.contains(&0) {
            return Err(Error::Config("feature with zero levels".into()));
        }
        let mut strides = vec![0usize; level_counts.len()];
        let mut total = 1usize;
        for (i, &k) in level_counts.iter().enumerate() {
            strides[i] = total;
            total = total
                .checked_mul(k)
                .ok_or_else(|| Error::Config("signal space too large".into()))?;
        }

        let mut entries = Vec::with_capacity(total);
        let mut combo = vec![0usize; level_counts.len()];
        for _ in 0..total {
            let mut weights = vec![0.0f64; m];
            for (j, weight) in weights.iter_mut().enumerate() {
                let mut w = prior.get(j);
                for (i, &v) in combo.iter().enumerate() {
                    w *= likelihoods.tables[i][j][v];
                }
                *weight = w;
            }
            let posterior = TypeDistribution::normalize(&weights).map_err(|_| {
                Error::Config(format!(
                    "signal combination {combo:?} has zero likelihood for every type"
                ))
            })?;
            entries.push(posterior);

            // next mixed-radix combination
            for i in 0..combo.len() {
                combo[i] += 1;
                if combo[i] < level_counts[i] {
                    break;
                }
                combo[i] = 0;
            }
        }
        Ok(Self {
            level_counts: level_counts.to_vec(),
            strides,
            entries,
        })
    }

    fn index_of(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.level_counts.len() {
            return Err(Error::Config(format!(
                "signal has {} features, table covers {}",
                values.len(),
                self.level_counts.len()
            )));
        }
        let mut idx = 0usize;
        for (i, &v) in values.iter().enumerate() {
            if v >= self.level_counts[i] {
                return Err(Error::Config(format!(
                    "signal feature {i} level {v} outside table domain"
                )));
            }
            idx += v * self.strides[i];
        }
        Ok(idx)
    }

    /// Posterior over object types for the given signal.
    pub fn posterior(&self, signal: &Signal) -> Result<&TypeDistribution> {
        Ok(&self.entries[self.index_of(&signal.values)?])
    }

    pub fn entries(&self) -> &[TypeDistribution] {
        &self.entries
    }
}

/// Ambient conditions modulating how much an expert trusts each sensor kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvCondition {
    Clear,
    Rain,
    HighMetalSoil,
}

impl EnvCondition {
    pub const ALL: [EnvCondition; 3] = [
        EnvCondition::Clear,
        EnvCondition::Rain,
        EnvCondition::HighMetalSoil,
    ];
}

/// Environment state plus the expert's reliability-weight table.
#[derive(Debug, Clone)]
pub struct EnvironmentState {
    pub condition: EnvCondition,
    weights: BTreeMap<(SensorType, EnvCondition), f64>,
}

impl EnvironmentState {
    pub fn new(
        condition: EnvCondition,
        weights: BTreeMap<(SensorType, EnvCondition), f64>,
    ) -> Result<Self> {
        for (&(sensor, cond), &w) in &weights {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Config(format!(
                    "expert weight for ({sensor}, {cond:?}) = {w} outside (0, 1]"
                )));
            }
        }
        Ok(Self { condition, weights })
    }

    /// The report weight an expert assigns to this sensor kind under the
    /// current conditions.
    pub fn expert_weight(&self, sensor_type: SensorType) -> Result<f64> {
        self.weights
            .get(&(sensor_type, self.condition))
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "no expert weight configured for ({sensor_type}, {:?})",
                    self.condition
                ))
            })
    }
}

/// Samples one noisy signal from the object's true features.
///
/// Each feature independently keeps its true level with probability
/// `1 - noise_level`, otherwise flips to a uniformly random other level.
pub fn sample_signal<R: Rng>(
    object: &ObjectInstance,
    sensor: &SensorTypeSpec,
    level_counts: &[usize],
    time: u32,
    rng: &mut R,
) -> Signal {
    let values = object
        .features
        .iter()
        .zip(level_counts)
        .map(|(&truth, &k)| {
            if k <= 1 || rng.random::<f64>() >= sensor.noise_level {
                truth
            } else {
                // uniformly random level other than the true one
                let offset = rng.random_range(1..k);
                (truth + offset) % k
            }
        })
        .collect();
    Signal {
        values,
        sensor_type: sensor.sensor_type,
        time,
    }
}

/// Derives sensor likelihood tables from physical feature profiles.
///
/// `profiles[type][feature][level]` is the probability that an object of the
/// given type physically has that feature level. The perceived level passes
/// through the sensor's uniform confusion channel, so
/// P(reading v | type) = sum_u profile(u | type) * channel(v | u).
pub fn likelihoods_from_profiles(
    profiles: &[Vec<Vec<f64>>],
    noise_level: f64,
    level_counts: &[usize],
) -> FeatureLikelihoods {
    let m = profiles.len();
    let f = level_counts.len();
    let mut tables = vec![Vec::with_capacity(m); f];
    for (i, &k) in level_counts.iter().enumerate() {
        for profile in profiles.iter().take(m) {
            let mut row = vec![0.0f64; k];
            for (v, slot) in row.iter_mut().enumerate() {
                let mut p = 0.0;
                for (u, &mass) in profile[i].iter().enumerate() {
                    let channel = if k <= 1 || u == v {
                        if k <= 1 {
                            1.0
                        } else {
                            1.0 - noise_level
                        }
                    } else {
                        noise_level / (k as f64 - 1.0)
                    };
                    p += mass * channel;
                }
                *slot = p;
            }
            tables[i].push(row);
        }
    }
    FeatureLikelihoods { tables }
}
