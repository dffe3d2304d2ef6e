//! Scenario configuration: the complete experiment description, its TOML
//! serialization, validation, and compilation into the runtime tables the
//! episode loop consumes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{Strategy, ValueFunctionParams};
use crate::decision::{DecisionModel, DecisionSpec};
use crate::error::{Error, Result};
use crate::signal::{
    likelihoods_from_profiles, ConditionalTypeTable, EnvCondition, EnvironmentState,
    FeatureLikelihoods,
};
use crate::types::{ObjectInstance, SensorType, SensorTypeSpec, TypeDistribution};

/// How agents pick their reporting strategy each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategySelection {
    /// Agents follow their configured disposition.
    Fixed,
    /// Agents pick the expected-utility-maximizing strategy every step.
    Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypesSection {
    pub names: Vec<String>,
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesSection {
    pub names: Vec<String>,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSection {
    pub id: String,
    pub true_type: String,
    pub features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorParams {
    pub count: u32,
    pub noise_level: f64,
    pub report_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetSection {
    pub md: SensorParams,
    pub ir: SensorParams,
    pub gpr: SensorParams,
}

impl FleetSection {
    pub fn get(&self, sensor: SensorType) -> &SensorParams {
        match sensor {
            SensorType::Md => &self.md,
            SensorType::Ir => &self.ir,
            SensorType::Gpr => &self.gpr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentsSection {
    /// Weight on the private signal in the belief update.
    pub w_bel: f64,
    /// Fraction of the roster with a malicious disposition, spread evenly.
    pub malicious_fraction: f64,
    pub strategy_selection: StrategySelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismSection {
    pub nu: u32,
    pub n_threshold: u32,
    pub n_max: u32,
    #[serde(default = "default_report_floor")]
    pub report_floor: f64,
}

fn default_report_floor() -> f64 {
    crate::agent::REPORT_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingSection {
    /// Belief confidence at which the object's type is revealed early.
    pub confidence: f64,
    /// Time window T.
    pub max_steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorWeights {
    pub md: f64,
    pub ir: f64,
    pub gpr: f64,
}

impl SensorWeights {
    fn get(&self, sensor: SensorType) -> f64 {
        match sensor {
            SensorType::Md => self.md,
            SensorType::Ir => self.ir,
            SensorType::Gpr => self.gpr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvWeightsSection {
    pub clear: SensorWeights,
    pub rain: SensorWeights,
    pub high_metal_soil: SensorWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSection {
    pub condition: EnvCondition,
    pub weights: EnvWeightsSection,
}

/// Physical feature-level distribution for one object type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSection {
    #[serde(rename = "type")]
    pub type_name: String,
    /// `features[feature][level]` = P(level | type), noise-free.
    pub features: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodsSection {
    /// `[feature][type][level]` perceived-level likelihoods per sensor kind.
    pub md: Vec<Vec<Vec<f64>>>,
    pub ir: Vec<Vec<Vec<f64>>>,
    pub gpr: Vec<Vec<Vec<f64>>>,
}

impl LikelihoodsSection {
    fn get(&self, sensor: SensorType) -> &Vec<Vec<Vec<f64>>> {
        match sensor {
            SensorType::Md => &self.md,
            SensorType::Ir => &self.ir,
            SensorType::Gpr => &self.gpr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModelSection {
    pub profiles: Vec<ProfileSection>,
    pub likelihoods: LikelihoodsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOptionSection {
    pub id: usize,
    pub label: String,
    pub md: u32,
    pub ir: u32,
    pub gpr: u32,
    /// P(decision | type) per object type.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSection {
    pub utilities: Vec<f64>,
    pub options: Vec<DecisionOptionSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub seed: u64,
    pub runs: u32,
}

/// The full scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub types: TypesSection,
    pub features: FeaturesSection,
    pub objects: Vec<ObjectSection>,
    pub fleet: FleetSection,
    pub agents: AgentsSection,
    pub mechanism: MechanismSection,
    pub stopping: StoppingSection,
    pub environment: EnvironmentSection,
    pub signal_model: SignalModelSection,
    pub decision: DecisionSection,
    pub experiment: ExperimentSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("scenario encode: {e}")))
    }

    fn type_index(&self, name: &str) -> Result<usize> {
        self.types
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("unknown object type name '{name}'")))
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.types.names.len();
        let f = self.features.levels.len();
        if m < 2 {
            return Err(Error::Config("need at least two object types".into()));
        }
        if self.features.names.len() != f || f == 0 {
            return Err(Error::Config("feature names and level counts differ".into()));
        }
        TypeDistribution::new(self.types.prior.clone())
            .map_err(|e| Error::Config(format!("prior: {e}")))?;
        if self.objects.is_empty() {
            return Err(Error::Config("no objects configured".into()));
        }
        for obj in &self.objects {
            let idx = self.type_index(&obj.true_type)?;
            ObjectInstance::new(obj.id.clone(), idx, obj.features.clone())
                .validate(m, &self.features.levels)?;
        }
        for sensor in SensorType::ALL {
            let params = self.fleet.get(sensor);
            SensorTypeSpec {
                sensor_type: sensor,
                noise_level: params.noise_level,
                report_cost: params.report_cost,
                count_available: params.count,
            }
            .validate()?;
        }
        if self.fleet.md.count == 0 {
            return Err(Error::Config(
                "at least one MD sensor is required for initial detection".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.agents.w_bel) {
            return Err(Error::Config(format!(
                "w_bel {} outside [0, 1]",
                self.agents.w_bel
            )));
        }
        if !(0.0..=1.0).contains(&self.agents.malicious_fraction) {
            return Err(Error::Config(format!(
                "malicious fraction {} outside [0, 1]",
                self.agents.malicious_fraction
            )));
        }
        ValueFunctionParams {
            nu: self.mechanism.nu,
            n_threshold: self.mechanism.n_threshold,
            n_max: self.mechanism.n_max,
        }
        .validate()?;
        let mechanism_floor_cap = 1.0 / m as f64;
        if !(self.mechanism.report_floor > 0.0 && self.mechanism.report_floor < mechanism_floor_cap)
        {
            return Err(Error::Config(format!(
                "report floor {} outside (0, 1/m)",
                self.mechanism.report_floor
            )));
        }
        if !(self.stopping.confidence > 0.0 && self.stopping.confidence <= 1.0) {
            return Err(Error::Config(format!(
                "confidence {} outside (0, 1]",
                self.stopping.confidence
            )));
        }
        if self.stopping.max_steps == 0 {
            return Err(Error::Config("time window must be at least 1".into()));
        }
        if self.experiment.runs == 0 {
            return Err(Error::Config("experiment needs at least one run".into()));
        }

        // profiles: one per type, rows are level distributions
        if self.signal_model.profiles.len() != m {
            return Err(Error::Config(format!(
                "{} profiles for {m} types",
                self.signal_model.profiles.len()
            )));
        }
        for (j, profile) in self.signal_model.profiles.iter().enumerate() {
            let idx = self.type_index(&profile.type_name)?;
            if idx != j {
                return Err(Error::Config(format!(
                    "profile {j} describes '{}', expected '{}'",
                    profile.type_name, self.types.names[j]
                )));
            }
            if profile.features.len() != f {
                return Err(Error::Config(format!(
                    "profile for {} covers {} features, expected {f}",
                    profile.type_name,
                    profile.features.len()
                )));
            }
            for (i, row) in profile.features.iter().enumerate() {
                if row.len() != self.features.levels[i] {
                    return Err(Error::Config(format!(
                        "profile for {} feature {i} has {} levels, expected {}",
                        profile.type_name,
                        row.len(),
                        self.features.levels[i]
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(Error::Config(format!(
                        "profile for {} feature {i} is not a distribution",
                        profile.type_name
                    )));
                }
            }
        }
        for sensor in SensorType::ALL {
            FeatureLikelihoods {
                tables: self.signal_model.likelihoods.get(sensor).clone(),
            }
            .validate(m, &self.features.levels)?;
        }

        // decision set: unique ids, bounded requests, complete model
        if self.decision.options.is_empty() {
            return Err(Error::Config("empty decision set".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for option in &self.decision.options {
            if !seen.insert(option.id) {
                return Err(Error::Config(format!(
                    "duplicate decision id {}",
                    option.id
                )));
            }
            if option.p.len() != m {
                return Err(Error::Config(format!(
                    "decision {} has {} probabilities, expected {m}",
                    option.id,
                    option.p.len()
                )));
            }
            decision_spec_of(option).validate()?;
        }
        let model = DecisionModel {
            p_table: ordered_p_table(&self.decision),
            utilities: self.decision.utilities.clone(),
        };
        model.validate(self.decision.options.len(), m)?;

        // weight table entries for the active condition
        let env = self.environment_state()?;
        for sensor in SensorType::ALL {
            env.expert_weight(sensor)?;
        }
        Ok(())
    }

    fn environment_state(&self) -> Result<EnvironmentState> {
        let mut weights = BTreeMap::new();
        for (cond, section) in [
            (EnvCondition::Clear, &self.environment.weights.clear),
            (EnvCondition::Rain, &self.environment.weights.rain),
            (
                EnvCondition::HighMetalSoil,
                &self.environment.weights.high_metal_soil,
            ),
        ] {
            for sensor in SensorType::ALL {
                weights.insert((sensor, cond), section.get(sensor));
            }
        }
        EnvironmentState::new(self.environment.condition, weights)
    }

    /// Validates and expands the document into runtime tables.
    pub fn compile(&self) -> Result<Compiled> {
        self.validate()?;
        let m = self.types.names.len();
        let prior = TypeDistribution::new(self.types.prior.clone())?;

        let objects = self
            .objects
            .iter()
            .map(|obj| {
                let idx = self.type_index(&obj.true_type)?;
                Ok(ObjectInstance::new(obj.id.clone(), idx, obj.features.clone()))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut sensor_specs = BTreeMap::new();
        let mut likelihoods = BTreeMap::new();
        let mut posterior_tables = BTreeMap::new();
        for sensor in SensorType::ALL {
            let params = self.fleet.get(sensor);
            sensor_specs.insert(
                sensor,
                SensorTypeSpec {
                    sensor_type: sensor,
                    noise_level: params.noise_level,
                    report_cost: params.report_cost,
                    count_available: params.count,
                },
            );
            let tables = FeatureLikelihoods {
                tables: self.signal_model.likelihoods.get(sensor).clone(),
            };
            posterior_tables.insert(
                sensor,
                ConditionalTypeTable::from_likelihoods(&prior, &self.features.levels, &tables)?,
            );
            likelihoods.insert(sensor, tables);
        }

        // roster in fleet order; malicious dispositions spread evenly
        let total: u32 = SensorType::ALL
            .iter()
            .map(|&s| self.fleet.get(s).count)
            .sum();
        let frac = self.agents.malicious_fraction;
        let mut roster = Vec::with_capacity(total as usize);
        let mut index = 0u32;
        for sensor in SensorType::ALL {
            for k in 0..self.fleet.get(sensor).count {
                let before = (f64::from(index) * frac).floor();
                let after = (f64::from(index + 1) * frac).floor();
                let strategy = if after > before {
                    Strategy::Malicious
                } else {
                    Strategy::Truthful
                };
                roster.push(RosterEntry {
                    id: format!("{sensor}-{k}"),
                    sensor_type: sensor,
                    strategy,
                });
                index += 1;
            }
        }

        let decisions: Vec<DecisionSpec> = {
            let mut options = self.decision.options.clone();
            options.sort_by_key(|o| o.id);
            options.iter().map(decision_spec_of).collect()
        };
        let model = DecisionModel {
            p_table: ordered_p_table(&self.decision),
            utilities: self.decision.utilities.clone(),
        };

        Ok(Compiled {
            m,
            type_names: self.types.names.clone(),
            feature_names: self.features.names.clone(),
            level_counts: self.features.levels.clone(),
            prior,
            objects,
            sensor_specs,
            roster,
            env: self.environment_state()?,
            posterior_tables,
            likelihoods,
            profiles: self
                .signal_model
                .profiles
                .iter()
                .map(|p| p.features.clone())
                .collect(),
            decisions,
            model,
            value_params: ValueFunctionParams {
                nu: self.mechanism.nu,
                n_threshold: self.mechanism.n_threshold,
                n_max: self.mechanism.n_max,
            },
            report_floor: self.mechanism.report_floor,
            w_bel: self.agents.w_bel,
            strategy_selection: self.agents.strategy_selection,
            confidence: self.stopping.confidence,
            max_steps: self.stopping.max_steps,
            seed: self.experiment.seed,
            runs: self.experiment.runs,
        })
    }
}

fn decision_spec_of(option: &DecisionOptionSection) -> DecisionSpec {
    let mut deployment = BTreeMap::new();
    for (sensor, count) in [
        (SensorType::Md, option.md),
        (SensorType::Ir, option.ir),
        (SensorType::Gpr, option.gpr),
    ] {
        if count > 0 {
            deployment.insert(sensor, count);
        }
    }
    DecisionSpec {
        id: option.id,
        label: option.label.clone(),
        deployment,
    }
}

/// Probability rows in decision-id order, so `p_table[id]` is decision id's
/// row after compilation.
fn ordered_p_table(section: &DecisionSection) -> Vec<Vec<f64>> {
    let mut options: Vec<&DecisionOptionSection> = section.options.iter().collect();
    options.sort_by_key(|o| o.id);
    options.iter().map(|o| o.p.clone()).collect()
}

/// One agent slot in the fleet roster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RosterEntry {
    pub id: String,
    pub sensor_type: SensorType,
    pub strategy: Strategy,
}

/// Validated, expanded scenario ready for the episode loop.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub m: usize,
    pub type_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub level_counts: Vec<usize>,
    pub prior: TypeDistribution,
    pub objects: Vec<ObjectInstance>,
    pub sensor_specs: BTreeMap<SensorType, SensorTypeSpec>,
    pub roster: Vec<RosterEntry>,
    pub env: EnvironmentState,
    pub posterior_tables: BTreeMap<SensorType, ConditionalTypeTable>,
    pub likelihoods: BTreeMap<SensorType, FeatureLikelihoods>,
    /// `[type][feature][level]` physical profiles.
    pub profiles: Vec<Vec<Vec<f64>>>,
    pub decisions: Vec<DecisionSpec>,
    pub model: DecisionModel,
    pub value_params: ValueFunctionParams,
    pub report_floor: f64,
    pub w_bel: f64,
    pub strategy_selection: StrategySelection,
    pub confidence: f64,
    pub max_steps: u32,
    pub seed: u64,
    pub runs: u32,
}

impl Compiled {
    pub fn sensor_spec(&self, sensor: SensorType) -> &SensorTypeSpec {
        &self.sensor_specs[&sensor]
    }

    pub fn type_name(&self, index: usize) -> &str {
        &self.type_names[index]
    }
}

/// The annotated default scenario: a mine, a metallic non-mine and a
/// non-metallic non-mine classified by a 5 MD / 3 IR / 2 GPR fleet over a
/// ten-step window with 0.95 stopping confidence.
pub fn default_scenario() -> ScenarioConfig {
    let type_names = vec![
        "mine".to_string(),
        "metallic".to_string(),
        "non_metallic".to_string(),
    ];
    let levels = vec![3, 3, 3, 3];
    let third = 1.0 / 3.0;

    // physical feature profiles per type; mines and metallic clutter share
    // high metal content and separate mainly on area and depth, while the
    // sensor-position feature carries no type information
    let profiles = vec![
        ProfileSection {
            type_name: "mine".into(),
            features: vec![
                vec![0.08, 0.22, 0.70],
                vec![0.44, 0.33, 0.23],
                vec![0.40, 0.34, 0.26],
                vec![third, third, third],
            ],
        },
        ProfileSection {
            type_name: "metallic".into(),
            features: vec![
                vec![0.08, 0.27, 0.65],
                vec![0.21, 0.37, 0.42],
                vec![0.24, 0.39, 0.37],
                vec![third, third, third],
            ],
        },
        ProfileSection {
            type_name: "non_metallic".into(),
            features: vec![
                vec![0.65, 0.25, 0.10],
                vec![0.25, 0.40, 0.35],
                vec![0.28, 0.40, 0.32],
                vec![third, third, third],
            ],
        },
    ];
    let raw_profiles: Vec<Vec<Vec<f64>>> = profiles.iter().map(|p| p.features.clone()).collect();

    let noise = |sensor: SensorType| match sensor {
        SensorType::Md => 0.45,
        SensorType::Ir => 0.32,
        SensorType::Gpr => 0.15,
    };
    // the inference tables assume a noisier channel than the generative
    // one, so single signals move beliefs cautiously
    let table_noise = |sensor: SensorType| match sensor {
        SensorType::Md => 0.66,
        SensorType::Ir => 0.54,
        SensorType::Gpr => 0.36,
    };
    let likelihood_tables = {
        let levels = levels.clone();
        move |sensor: SensorType| {
            likelihoods_from_profiles(&raw_profiles, table_noise(sensor), &levels).tables
        }
    };

    ScenarioConfig {
        types: TypesSection {
            names: type_names,
            prior: vec![third, third, third],
        },
        features: FeaturesSection {
            names: vec![
                "metal_content".into(),
                "area".into(),
                "depth".into(),
                "position".into(),
            ],
            levels,
        },
        objects: vec![
            ObjectSection {
                id: "object-mine".into(),
                true_type: "mine".into(),
                features: vec![2, 0, 0, 1],
            },
            ObjectSection {
                id: "object-metallic".into(),
                true_type: "metallic".into(),
                features: vec![2, 2, 1, 1],
            },
            ObjectSection {
                id: "object-non-metallic".into(),
                true_type: "non_metallic".into(),
                features: vec![0, 1, 1, 1],
            },
        ],
        fleet: FleetSection {
            md: SensorParams {
                count: 5,
                noise_level: noise(SensorType::Md),
                report_cost: 1.0,
            },
            ir: SensorParams {
                count: 3,
                noise_level: noise(SensorType::Ir),
                report_cost: 2.0,
            },
            gpr: SensorParams {
                count: 2,
                noise_level: noise(SensorType::Gpr),
                report_cost: 4.0,
            },
        },
        agents: AgentsSection {
            w_bel: 0.5,
            malicious_fraction: 0.0,
            strategy_selection: StrategySelection::Fixed,
        },
        mechanism: MechanismSection {
            nu: 5,
            n_threshold: 5,
            n_max: 20,
            report_floor: crate::agent::REPORT_FLOOR,
        },
        stopping: StoppingSection {
            confidence: 0.95,
            max_steps: 10,
        },
        environment: EnvironmentSection {
            condition: EnvCondition::Clear,
            weights: EnvWeightsSection {
                clear: SensorWeights {
                    md: 1.0,
                    ir: 1.0,
                    gpr: 1.0,
                },
                rain: SensorWeights {
                    md: 1.0,
                    ir: 0.3,
                    gpr: 1.0,
                },
                high_metal_soil: SensorWeights {
                    md: 0.4,
                    ir: 1.0,
                    gpr: 1.0,
                },
            },
        },
        signal_model: SignalModelSection {
            profiles,
            likelihoods: LikelihoodsSection {
                md: likelihood_tables(SensorType::Md),
                ir: likelihood_tables(SensorType::Ir),
                gpr: likelihood_tables(SensorType::Gpr),
            },
        },
        decision: DecisionSection {
            utilities: vec![10.0, 6.0, 6.0],
            options: default_decision_options(),
        },
        experiment: ExperimentSection { seed: 7, runs: 10 },
    }
}

/// The fourteen-decision set: do nothing, one to three sensors of a single
/// kind, and the four mixed one-each combinations.
fn default_decision_options() -> Vec<DecisionOptionSection> {
    let opt = |id: usize, label: &str, md: u32, ir: u32, gpr: u32, p: [f64; 3]| {
        DecisionOptionSection {
            id,
            label: label.into(),
            md,
            ir,
            gpr,
            p: p.to_vec(),
        }
    };
    vec![
        opt(0, "none", 0, 0, 0, [0.01, 0.01, 0.02]),
        opt(1, "1md", 1, 0, 0, [0.06, 0.08, 0.25]),
        opt(2, "2md", 2, 0, 0, [0.04, 0.05, 0.14]),
        opt(3, "3md", 3, 0, 0, [0.02, 0.02, 0.06]),
        opt(4, "1ir", 0, 1, 0, [0.05, 0.20, 0.13]),
        opt(5, "2ir", 0, 2, 0, [0.03, 0.10, 0.06]),
        opt(6, "3ir", 0, 3, 0, [0.02, 0.04, 0.03]),
        opt(7, "1gpr", 0, 0, 1, [0.22, 0.05, 0.03]),
        opt(8, "2gpr", 0, 0, 2, [0.08, 0.02, 0.01]),
        opt(9, "3gpr", 0, 0, 3, [0.04, 0.01, 0.01]),
        opt(10, "1md_1ir", 1, 1, 0, [0.12, 0.22, 0.16]),
        opt(11, "1md_1gpr", 1, 0, 1, [0.16, 0.06, 0.04]),
        opt(12, "1ir_1gpr", 0, 1, 1, [0.08, 0.09, 0.03]),
        opt(13, "1md_1ir_1gpr", 1, 1, 1, [0.07, 0.05, 0.03]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_validates_and_compiles() {
        let config = default_scenario();
        let compiled = config.compile().unwrap();
        assert_eq!(compiled.m, 3);
        assert_eq!(compiled.roster.len(), 10);
        assert_eq!(compiled.decisions.len(), 14);
        assert_eq!(compiled.objects.len(), 3);
        assert_eq!(compiled.max_steps, 10);
        assert!(compiled
            .roster
            .iter()
            .all(|r| r.strategy == Strategy::Truthful));
    }

    #[test]
    fn toml_round_trip_preserves_the_document() {
        let config = default_scenario();
        let text = config.to_toml_string().unwrap();
        let parsed = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn malicious_fraction_spreads_across_sensor_kinds() {
        let mut config = default_scenario();
        config.agents.malicious_fraction = 0.3;
        let compiled = config.compile().unwrap();
        let malicious: Vec<&RosterEntry> = compiled
            .roster
            .iter()
            .filter(|r| r.strategy == Strategy::Malicious)
            .collect();
        assert_eq!(malicious.len(), 3);
        let kinds: std::collections::BTreeSet<SensorType> =
            malicious.iter().map(|r| r.sensor_type).collect();
        assert_eq!(kinds.len(), 3);
    }

    #[test]
    fn unknown_type_names_are_rejected() {
        let mut config = default_scenario();
        config.objects[0].true_type = "tank".into();
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn duplicate_decision_ids_are_rejected() {
        let mut config = default_scenario();
        config.decision.options[1].id = 0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn oversized_deployment_requests_are_rejected() {
        let mut config = default_scenario();
        config.decision.options[13].md = 4;
        assert!(config.validate().is_err());
    }

    #[test]
    fn missing_md_fleet_is_rejected() {
        let mut config = default_scenario();
        config.fleet.md.count = 0;
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn decision_rows_follow_id_order_after_compilation() {
        let mut config = default_scenario();
        config.decision.options.reverse();
        let compiled = config.compile().unwrap();
        for (i, d) in compiled.decisions.iter().enumerate() {
            assert_eq!(d.id, i);
        }
        assert_eq!(compiled.model.p_table[7], vec![0.22, 0.05, 0.03]);
    }
}
