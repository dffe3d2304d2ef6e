//! Expected-utility-maximizing deployment decisions from the aggregated
//! belief, plus fleet bookkeeping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{SensorType, TypeDistribution};

/// One available action: deploy some number of sensors of each kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionSpec {
    pub id: usize,
    pub label: String,
    /// Requested sensors per kind; total request bounded by
    /// [`DecisionSpec::MAX_TOTAL_REQUEST`].
    pub deployment: BTreeMap<SensorType, u32>,
}

impl DecisionSpec {
    pub const MAX_TOTAL_REQUEST: u32 = 3;

    pub fn request(&self, sensor: SensorType) -> u32 {
        self.deployment.get(&sensor).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let total: u32 = self.deployment.values().sum();
        if total > Self::MAX_TOTAL_REQUEST {
            return Err(Error::Config(format!(
                "decision {} requests {total} sensors, max {}",
                self.id,
                Self::MAX_TOTAL_REQUEST
            )));
        }
        Ok(())
    }
}

/// Domain-knowledge tables driving the decision maker: the probability of
/// taking each decision given the object type, and the utility of each type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionModel {
    /// `p_table[decision_id][type]` = P(decision | type), each in [0, 1].
    pub p_table: Vec<Vec<f64>>,
    /// Utility of determining an object to be of each type.
    pub utilities: Vec<f64>,
}

impl DecisionModel {
    pub fn validate(&self, decisions: usize, m: usize) -> Result<()> {
        if self.p_table.len() != decisions {
            return Err(Error::Config(format!(
                "decision table covers {} decisions, scenario declares {decisions}",
                self.p_table.len()
            )));
        }
        for (i, row) in self.p_table.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Config(format!(
                    "decision {i} probability row covers {} types, expected {m}",
                    row.len()
                )));
            }
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::Config(format!(
                    "decision {i} has probabilities outside [0, 1]"
                )));
            }
        }
        if self.utilities.len() != m {
            return Err(Error::Config(format!(
                "{} utilities for {m} types",
                self.utilities.len()
            )));
        }
        if self.utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::Config("utilities must be finite".into()));
        }
        Ok(())
    }

    pub fn probability(&self, decision_id: usize, type_index: usize) -> Result<f64> {
        self.p_table
            .get(decision_id)
            .and_then(|row| row.get(type_index))
            .copied()
            .ok_or_else(|| {
                Error::Config(format!(
                    "no probability entry for decision {decision_id}, type {type_index}"
                ))
            })
    }
}

/// One recorded decision, including what actually got deployed after fleet
/// clamping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub time: u32,
    pub decision_id: usize,
    pub expected_utility: f64,
    /// Sensors actually deployed this step, bounded by availability.
    pub deployed: BTreeMap<SensorType, u32>,
    /// Requested-but-unavailable counts.
    pub shortfall: BTreeMap<SensorType, u32>,
}

impl DecisionRecord {
    pub fn deployed_count(&self, sensor: SensorType) -> u32 {
        self.deployed.get(&sensor).copied().unwrap_or(0)
    }
}

/// Remaining undeployed sensors per kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FleetState {
    available: BTreeMap<SensorType, u32>,
}

impl FleetState {
    pub fn new(available: BTreeMap<SensorType, u32>) -> Self {
        Self { available }
    }

    pub fn available(&self, sensor: SensorType) -> u32 {
        self.available.get(&sensor).copied().unwrap_or(0)
    }

    /// Removes up to `requested` sensors of a kind, returning how many were
    /// actually taken.
    pub fn take(&mut self, sensor: SensorType, requested: u32) -> u32 {
        let slot = self.available.entry(sensor).or_insert(0);
        let taken = requested.min(*slot);
        *slot -= taken;
        taken
    }
}

/// Expected utility of a decision under the aggregated belief:
/// sum over types of P(decision | type) * utility(type) * belief(type).
pub fn expected_utility(
    decision: &DecisionSpec,
    belief: &TypeDistribution,
    model: &DecisionModel,
) -> Result<f64> {
    let m = belief.len();
    if model.utilities.len() != m {
        return Err(Error::Config(format!(
            "{} utilities for {m} types",
            model.utilities.len()
        )));
    }
    let mut eu = 0.0;
    for j in 0..m {
        eu += model.probability(decision.id, j)? * model.utilities[j] * belief.get(j);
    }
    Ok(eu)
}

/// Picks the decision with maximal expected utility; ties break toward the
/// lowest decision id.
pub fn decide<'a>(
    belief: &TypeDistribution,
    decisions: &'a [DecisionSpec],
    model: &DecisionModel,
) -> Result<(&'a DecisionSpec, f64)> {
    if decisions.is_empty() {
        return Err(Error::Precondition("empty decision set".into()));
    }
    let mut ranked: Vec<&DecisionSpec> = decisions.iter().collect();
    ranked.sort_by_key(|d| d.id);
    let mut best = ranked[0];
    let mut best_eu = expected_utility(best, belief, model)?;
    for &d in &ranked[1..] {
        let eu = expected_utility(d, belief, model)?;
        if eu > best_eu {
            best = d;
            best_eu = eu;
        }
    }
    Ok((best, best_eu))
}

/// Deploys as much of the request as the fleet can supply; shortfalls are
/// recorded, never fatal.
pub fn apply_decision(
    decision: &DecisionSpec,
    fleet: &mut FleetState,
) -> (BTreeMap<SensorType, u32>, BTreeMap<SensorType, u32>) {
    let mut deployed = BTreeMap::new();
    let mut shortfall = BTreeMap::new();
    for sensor in SensorType::ALL {
        let requested = decision.request(sensor);
        if requested == 0 {
            continue;
        }
        let taken = fleet.take(sensor, requested);
        if taken > 0 {
            deployed.insert(sensor, taken);
        }
        if taken < requested {
            shortfall.insert(sensor, requested - taken);
        }
    }
    (deployed, shortfall)
}
