//! Episode loop and multi-run experiments.
//!
//! An episode classifies one object: each perceiving agent samples a signal,
//! updates its belief, submits a report; the market maker pays instantaneous
//! rewards and aggregates; the decision maker deploys additional sensors;
//! metrics are recorded. The episode stops when the aggregate reaches the
//! confidence threshold or the time window closes, after which the market
//! settles (prediction-market method only).
//!
//! All randomness flows through one seeded stream that generates the full
//! signal panel up front, so every fusion method consumes identical signals
//! for a given seed.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{
    choose_strategy, instantaneous_reward, make_report, report_cost, report_value, update_belief,
    AgentState, Report, Strategy, StrategyContext,
};
use crate::baselines::dempster_shafer::{MassFunction, TwoLevelFusion};
use crate::baselines::ddf::{ddf_update, FilterState};
use crate::decision::{apply_decision, decide, DecisionRecord, FleetState};
use crate::error::{Error, Result};
use crate::market::{self, MarketState, Settlement};
use crate::metrics::{kl_divergence, nmse_db, rmse, MetricSample, KL_EPSILON};
use crate::scenario::{Compiled, StrategySelection};
use crate::signal::{sample_signal, Signal};
use crate::types::{FusionMethod, ObjectInstance, SensorType, TypeDistribution};

/// One signal recorded against the agent that perceived it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentSignal {
    pub agent_id: String,
    pub values: Vec<usize>,
}

/// Everything that happened in one time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub time: u32,
    pub signals: Vec<AgentSignal>,
    pub reports: Vec<Report>,
    pub aggregate: TypeDistribution,
    pub decision: DecisionRecord,
    pub metrics: MetricSample,
}

/// Settlement entry enriched with roster context for export.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SettlementRow {
    pub sensor_type: SensorType,
    pub strategy: Strategy,
    pub rewards_sum: f64,
    pub score: f64,
    pub total: f64,
}

/// Full record of one episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub object_id: String,
    pub true_type: usize,
    pub method: FusionMethod,
    pub seed: u64,
    pub run: u32,
    pub steps: Vec<StepRecord>,
    pub steps_used: u32,
    pub converged: bool,
    pub predicted_type: usize,
    pub settlement: Option<BTreeMap<String, SettlementRow>>,
}

/// Pre-generates the signal every agent would perceive at every step.
///
/// Generated before any method-specific processing, so the panel is a pure
/// function of (scenario, object, seed).
pub fn signal_panel(compiled: &Compiled, object: &ObjectInstance, seed: u64) -> Vec<Vec<Signal>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut panel = vec![Vec::with_capacity(compiled.max_steps as usize); compiled.roster.len()];
    for t in 1..=compiled.max_steps {
        for (k, entry) in compiled.roster.iter().enumerate() {
            let spec = compiled.sensor_spec(entry.sensor_type);
            panel[k].push(sample_signal(
                object,
                spec,
                &compiled.level_counts,
                t,
                &mut rng,
            ));
        }
    }
    panel
}

/// Builds the two-level evidence one signal contributes to the
/// Dempster-Shafer baseline: a metal-content mass from the sensor's
/// confusion channel, and a mine-vs-friendly mass for each candidate metal
/// level, all discounted by the expert weight toward ignorance.
fn ds_evidence(
    compiled: &Compiled,
    signal: &Signal,
    weight: f64,
) -> Result<(MassFunction, Vec<MassFunction>)> {
    let metal_levels = compiled.level_counts[0];
    let noise = compiled.sensor_spec(signal.sensor_type).noise_level;
    let reading = signal.values[0];
    let full = (1u32 << metal_levels) - 1;

    let mut level1 = BTreeMap::new();
    for level in 0..metal_levels {
        let channel = if level == reading {
            1.0 - noise
        } else {
            noise / (metal_levels as f64 - 1.0)
        };
        let mass = weight * channel;
        if mass > 0.0 {
            level1.insert(1u32 << level, mass);
        }
    }
    if weight < 1.0 {
        *level1.entry(full).or_insert(0.0) += 1.0 - weight;
    }
    let level1 = MassFunction::new(metal_levels, level1)?;

    let likelihoods = &compiled.likelihoods[&signal.sensor_type];
    let mut level2 = Vec::with_capacity(metal_levels);
    for level in 0..metal_levels {
        // P(type | metal level, remaining features) from the shared tables
        let mut weights = vec![0.0f64; compiled.m];
        for (j, slot) in weights.iter_mut().enumerate() {
            let mut w = compiled.prior.get(j) * compiled.profiles[j][0][level];
            for (i, &v) in signal.values.iter().enumerate().skip(1) {
                w *= likelihoods.tables[i][j][v];
            }
            *slot = w;
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            level2.push(MassFunction::vacuous(2));
            continue;
        }
        let mine = weights[0] / total;
        let mut masses = BTreeMap::new();
        if weight * mine > 0.0 {
            masses.insert(0b01u32, weight * mine);
        }
        if weight * (1.0 - mine) > 0.0 {
            masses.insert(0b10u32, weight * (1.0 - mine));
        }
        if weight < 1.0 {
            *masses.entry(0b11u32).or_insert(0.0) += 1.0 - weight;
        }
        level2.push(MassFunction::new(2, masses)?);
    }
    Ok((level1, level2))
}

enum Fusion {
    Market,
    DempsterShafer(TwoLevelFusion),
    InformationFilter(FilterState),
}

/// Runs one seeded episode of the given fusion method against one object.
pub fn run_episode(
    compiled: &Compiled,
    object_index: usize,
    seed: u64,
    run: u32,
    method: FusionMethod,
) -> Result<EpisodeRecord> {
    let object = compiled
        .objects
        .get(object_index)
        .ok_or_else(|| Error::Argument(format!("no object at index {object_index}")))?;
    let panel = signal_panel(compiled, object, seed);
    let truth = TypeDistribution::one_hot(object.true_type, compiled.m)?;

    let mut agents: Vec<AgentState> = compiled
        .roster
        .iter()
        .map(|entry| AgentState {
            id: entry.id.clone(),
            sensor_type: entry.sensor_type,
            strategy: entry.strategy,
            belief: compiled.prior.clone(),
            reports_made: 0,
            cumulative_reward: 0.0,
            w_bel: compiled.w_bel,
        })
        .collect();

    // initial detection: the first MD sensor is already on site and starts
    // perceiving at step 1
    let mut deployed_at: Vec<Option<u32>> = vec![None; agents.len()];
    let bootstrap = compiled
        .roster
        .iter()
        .position(|r| r.sensor_type == SensorType::Md)
        .expect("validated fleet has an MD sensor");
    deployed_at[bootstrap] = Some(0);
    let mut fleet = FleetState::new(
        SensorType::ALL
            .iter()
            .map(|&s| (s, compiled.sensor_spec(s).count_available))
            .collect(),
    );
    fleet.take(SensorType::Md, 1);

    let mut fusion = match method {
        FusionMethod::Pm => Fusion::Market,
        FusionMethod::Ds => {
            Fusion::DempsterShafer(TwoLevelFusion::new(compiled.level_counts[0], compiled.m))
        }
        FusionMethod::Ddf => Fusion::InformationFilter(FilterState::new(compiled.prior.clone())),
    };

    let mut market = MarketState::new(object.id.clone());
    let mut aggregate = TypeDistribution::uniform(compiled.m)?;
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut converged = false;

    for t in 1..=compiled.max_steps {
        // 1. perceiving agents sample, update beliefs and report
        let mut signals = Vec::new();
        let mut raw_signals = Vec::new();
        let mut reports = Vec::new();
        let mut rewards = Vec::new();
        for (k, agent) in agents.iter_mut().enumerate() {
            match deployed_at[k] {
                Some(at) if at < t => {}
                _ => continue,
            }
            let signal = &panel[k][(t - 1) as usize];
            let posterior = compiled.posterior_tables[&agent.sensor_type].posterior(signal)?;
            agent.belief = update_belief(posterior, &aggregate, agent.w_bel)?;

            let strategy = match compiled.strategy_selection {
                StrategySelection::Fixed => agent.strategy,
                StrategySelection::Rational => {
                    let varpi_by_type = (0..compiled.m)
                        .map(|j| market::decision_weight(market.decisions(), j, &compiled.model))
                        .collect::<Result<Vec<f64>>>()?;
                    let ctx = StrategyContext {
                        varpi_by_type,
                        time: t,
                        horizon: compiled.max_steps,
                        value_params: compiled.value_params,
                        report_cost: compiled.sensor_spec(agent.sensor_type).report_cost,
                        report_floor: compiled.report_floor,
                    };
                    choose_strategy(agent, &[Strategy::Truthful, Strategy::Malicious], &ctx)?
                }
            };
            let values = make_report(&agent.belief, strategy, compiled.report_floor)?;
            let expert_weight = compiled.env.expert_weight(agent.sensor_type)?;

            agent.reports_made += 1;
            let value = report_value(agent.reports_made, &compiled.value_params);
            let cost = report_cost(compiled.sensor_spec(agent.sensor_type));
            let reward = instantaneous_reward(value, cost);
            agent.cumulative_reward += reward;

            signals.push(AgentSignal {
                agent_id: agent.id.clone(),
                values: signal.values.clone(),
            });
            raw_signals.push(signal.clone());
            reports.push(Report {
                agent_id: agent.id.clone(),
                time: t,
                values,
                expert_weight,
            });
            rewards.push(reward);
        }

        // 2. the market maker pays rewards and aggregates
        market.record_step(reports.clone(), &rewards)?;
        aggregate = match &mut fusion {
            Fusion::Market => market::aggregate_beliefs(&reports)?,
            Fusion::DempsterShafer(state) => {
                for (signal, report) in raw_signals.iter().zip(&reports) {
                    let (level1, level2) = ds_evidence(compiled, signal, report.expert_weight)?;
                    state.absorb(&level1, &level2)?;
                }
                state.classify()?
            }
            Fusion::InformationFilter(state) => {
                for report in &reports {
                    *state = ddf_update(state, &report.values)?;
                }
                state.posterior.clone()
            }
        };
        market.record_aggregate(aggregate.clone());

        // 3. the decision maker deploys additional sensors
        let (chosen, eu) = decide(&aggregate, &compiled.decisions, &compiled.model)?;
        let (deployed, shortfall) = apply_decision(chosen, &mut fleet);
        for sensor in SensorType::ALL {
            let mut remaining = deployed.get(&sensor).copied().unwrap_or(0);
            for (k, entry) in compiled.roster.iter().enumerate() {
                if remaining == 0 {
                    break;
                }
                if entry.sensor_type == sensor && deployed_at[k].is_none() {
                    deployed_at[k] = Some(t);
                    remaining -= 1;
                }
            }
        }
        let decision = DecisionRecord {
            time: t,
            decision_id: chosen.id,
            expected_utility: eu,
            deployed,
            shortfall,
        };
        market.record_decision(decision.clone());

        // 4. metrics against the ground truth
        let metrics = MetricSample {
            time: t,
            method,
            rmse: rmse(&aggregate, &truth)?,
            nmse_db: nmse_db(&aggregate, &truth)?,
            kl: kl_divergence(&aggregate, &truth, KL_EPSILON)?,
        };

        steps.push(StepRecord {
            time: t,
            signals,
            reports,
            aggregate: aggregate.clone(),
            decision,
            metrics,
        });

        if aggregate.argmax().1 >= compiled.confidence {
            converged = true;
            break;
        }
    }

    market.close_window();
    let settlement = if method == FusionMethod::Pm {
        let raw = market::settle_market(&market, object.true_type, &compiled.model)?;
        Some(enrich_settlement(compiled, raw))
    } else {
        None
    };

    let steps_used = steps.len() as u32;
    let predicted_type = aggregate.argmax().0;
    Ok(EpisodeRecord {
        object_id: object.id.clone(),
        true_type: object.true_type,
        method,
        seed,
        run,
        steps,
        steps_used,
        converged,
        predicted_type,
        settlement,
    })
}

fn enrich_settlement(
    compiled: &Compiled,
    raw: BTreeMap<String, Settlement>,
) -> BTreeMap<String, SettlementRow> {
    raw.into_iter()
        .map(|(agent_id, s)| {
            let entry = compiled
                .roster
                .iter()
                .find(|r| r.id == agent_id)
                .expect("settled agent is on the roster");
            (
                agent_id,
                SettlementRow {
                    sensor_type: entry.sensor_type,
                    strategy: entry.strategy,
                    rewards_sum: s.rewards_sum,
                    score: s.score,
                    total: s.total,
                },
            )
        })
        .collect()
}

/// Which per-step metric to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Rmse,
    NmseDb,
    Kl,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Rmse, MetricKind::NmseDb, MetricKind::Kl];

    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Rmse => "rmse",
            MetricKind::NmseDb => "nmse_db",
            MetricKind::Kl => "kl",
        }
    }

    fn pick(self, sample: &MetricSample) -> f64 {
        match self {
            MetricKind::Rmse => sample.rmse,
            MetricKind::NmseDb => sample.nmse_db,
            MetricKind::Kl => sample.kl,
        }
    }
}

/// Mean and standard deviation of a metric at one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStat {
    pub time: u32,
    pub mean: f64,
    pub stdev: f64,
}

/// All episodes of a multi-run experiment.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub episodes: Vec<EpisodeRecord>,
    pub max_steps: u32,
    pub type_names: Vec<String>,
}

fn mean_stdev(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ExperimentResult {
    pub fn episodes_of(&self, method: FusionMethod) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter().filter(move |e| e.method == method)
    }

    /// Metric value at a step, carrying the final value forward after the
    /// episode terminated.
    pub fn metric_at(episode: &EpisodeRecord, time: u32, kind: MetricKind) -> f64 {
        let idx = time.min(episode.steps_used).max(1) as usize - 1;
        kind.pick(&episode.steps[idx].metrics)
    }

    /// Per-step mean and standard deviation across all episodes of a
    /// method, for every step up to the window.
    pub fn metric_curve(&self, method: FusionMethod, kind: MetricKind) -> Vec<StepStat> {
        (1..=self.max_steps)
            .map(|t| {
                let values: Vec<f64> = self
                    .episodes_of(method)
                    .map(|e| Self::metric_at(e, t, kind))
                    .collect();
                let (mean, stdev) = mean_stdev(&values);
                StepStat {
                    time: t,
                    mean,
                    stdev,
                }
            })
            .collect()
    }

    /// Mean and standard deviation of steps needed, optionally restricted to
    /// one object.
    pub fn steps_summary(&self, method: FusionMethod, object_id: Option<&str>) -> (f64, f64) {
        let values: Vec<f64> = self
            .episodes_of(method)
            .filter(|e| object_id.is_none_or(|id| e.object_id == id))
            .map(|e| f64::from(e.steps_used))
            .collect();
        mean_stdev(&values)
    }

    /// RMSE at each episode's final recorded step.
    pub fn final_rmse_values(&self, method: FusionMethod) -> Vec<f64> {
        self.episodes_of(method)
            .map(|e| e.steps.last().expect("episode ran at least one step").metrics.rmse)
            .collect()
    }

    pub fn mean_final_rmse(&self, method: FusionMethod) -> f64 {
        mean_stdev(&self.final_rmse_values(method)).0
    }

    /// Settled totals grouped by the agents' disposition.
    pub fn settlement_totals_by_strategy(&self) -> BTreeMap<&'static str, Vec<f64>> {
        let mut grouped: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
        for episode in &self.episodes {
            if let Some(settlement) = &episode.settlement {
                for row in settlement.values() {
                    let key = match row.strategy {
                        Strategy::Truthful => "truthful",
                        Strategy::Malicious => "malicious",
                    };
                    grouped.entry(key).or_default().push(row.total);
                }
            }
        }
        grouped
    }
}

/// Runs `runs` independent episodes per object and method with derived
/// seeds (base seed + run index).
pub fn run_experiment(compiled: &Compiled, methods: &[FusionMethod]) -> Result<ExperimentResult> {
    if compiled.runs == 0 {
        return Err(Error::Precondition("experiment needs at least one run".into()));
    }
    let mut episodes = Vec::new();
    for object_index in 0..compiled.objects.len() {
        for run in 0..compiled.runs {
            let seed = compiled.seed + u64::from(run);
            for &method in methods {
                episodes.push(run_episode(compiled, object_index, seed, run, method)?);
            }
        }
    }
    Ok(ExperimentResult {
        episodes,
        max_steps: compiled.max_steps,
        type_names: compiled.type_names.clone(),
    })
}
