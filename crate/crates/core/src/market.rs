//! The market maker: decision scoring rule, payment function, weighted
//! average payment and belief aggregation.
//!
//! Aggregation implements the generalized inverse of the average payment
//! function. Substituting the average payment into that inverse, the
//! weighted reward sums cancel additively and the decision weight cancels
//! through the division, leaving a normalized weighted geometric pool of the
//! step's reports. The simplified log-space form is the production path; the
//! literal evaluation lives in [`crate::verify`] as an independent oracle.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::agent::{Report, REPORT_FLOOR};
use crate::decision::{DecisionModel, DecisionRecord};
use crate::error::{Error, Result};
use crate::types::TypeDistribution;

/// Floor applied to the decision weight so it can never zero out or flip
/// the final score.
pub const EPS_WEIGHT: f64 = 1e-9;

/// Clipped reports are renormalized, which can leave components a hair
/// under [`REPORT_FLOOR`]; scoring accepts down to this bound.
const SCORE_FLOOR: f64 = REPORT_FLOOR * 0.999;

/// One reward credited to an agent, with the expert weight its report
/// carried at that step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub time: u32,
    pub expert_weight: f64,
    pub reward: f64,
}

/// Final payout breakdown for one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settlement {
    pub rewards_sum: f64,
    pub score: f64,
    pub total: f64,
}

/// Per-object market ledger: reports by step, aggregate trajectory,
/// decision history and instantaneous rewards.
#[derive(Debug, Clone, Default)]
pub struct MarketState {
    pub object_id: String,
    reports_by_step: Vec<Vec<Report>>,
    aggregate_trajectory: Vec<TypeDistribution>,
    decisions: Vec<DecisionRecord>,
    rewards_ledger: BTreeMap<String, Vec<LedgerEntry>>,
    window_closed: bool,
}

impl MarketState {
    pub fn new(object_id: impl Into<String>) -> Self {
        Self {
            object_id: object_id.into(),
            ..Self::default()
        }
    }

    /// Records one step's reports and the instantaneous rewards paid for
    /// them (parallel slices).
    pub fn record_step(&mut self, reports: Vec<Report>, rewards: &[f64]) -> Result<()> {
        if self.window_closed {
            return Err(Error::State("window already closed".into()));
        }
        if reports.len() != rewards.len() {
            return Err(Error::Argument(format!(
                "{} reports but {} rewards",
                reports.len(),
                rewards.len()
            )));
        }
        for (report, &reward) in reports.iter().zip(rewards) {
            self.rewards_ledger
                .entry(report.agent_id.clone())
                .or_default()
                .push(LedgerEntry {
                    time: report.time,
                    expert_weight: report.expert_weight,
                    reward,
                });
        }
        self.reports_by_step.push(reports);
        Ok(())
    }

    pub fn record_aggregate(&mut self, aggregate: TypeDistribution) {
        self.aggregate_trajectory.push(aggregate);
    }

    pub fn record_decision(&mut self, record: DecisionRecord) {
        self.decisions.push(record);
    }

    /// Marks the object's time window as closed; settlement requires this.
    pub fn close_window(&mut self) {
        self.window_closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.window_closed
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn aggregate_trajectory(&self) -> &[TypeDistribution] {
        &self.aggregate_trajectory
    }

    pub fn reports_by_step(&self) -> &[Vec<Report>] {
        &self.reports_by_step
    }

    pub fn ledger(&self, agent_id: &str) -> Option<&[LedgerEntry]> {
        self.rewards_ledger.get(agent_id).map(Vec::as_slice)
    }

    pub fn ledgers(&self) -> &BTreeMap<String, Vec<LedgerEntry>> {
        &self.rewards_ledger
    }

    fn last_report_of(&self, agent_id: &str) -> Option<&Report> {
        self.reports_by_step
            .iter()
            .rev()
            .find_map(|step| step.iter().find(|r| r.agent_id == agent_id))
    }
}

/// Cumulative decision weight for one object type: the sum over recorded
/// decisions of P(decision | type) * utility(type), floored at
/// [`EPS_WEIGHT`] so downstream divisions and scores stay well-defined.
pub fn decision_weight(
    decisions: &[DecisionRecord],
    type_index: usize,
    model: &DecisionModel,
) -> Result<f64> {
    let utility = *model.utilities.get(type_index).ok_or_else(|| {
        Error::Config(format!("no utility entry for type {type_index}"))
    })?;
    let mut total = 0.0;
    for decision in decisions {
        total += model.probability(decision.decision_id, type_index)? * utility;
    }
    Ok(total.max(EPS_WEIGHT))
}

/// Logarithmic decision score for the reported probability of the realized
/// type: `varpi * ln(r_j)`. Never positive; zero exactly when the report
/// put unit mass on the true type.
pub fn score_report(r_j: f64, varpi: f64) -> Result<f64> {
    if varpi <= 0.0 || varpi.is_nan() {
        return Err(Error::Argument(format!(
            "decision weight {varpi} must be positive"
        )));
    }
    if !(SCORE_FLOOR..=1.0 + 1e-12).contains(&r_j) {
        return Err(Error::Argument(format!(
            "report component {r_j} outside [{REPORT_FLOOR}, 1]; clipping is the reporter's job"
        )));
    }
    Ok(varpi * r_j.min(1.0).ln())
}

/// Total agent compensation: accumulated instantaneous rewards plus the
/// final decision score.
pub fn payment(rewards: &[f64], final_score: f64) -> f64 {
    rewards.iter().sum::<f64>() + final_score
}

/// Weighted average of the payment function across the step's reporting
/// agents: their expert-weighted reward history plus `varpi` times the
/// weighted log scores of the current reports at `type_index`.
pub fn average_payment(
    reports: &[Report],
    ledgers: &BTreeMap<String, Vec<LedgerEntry>>,
    varpi: f64,
    type_index: usize,
) -> Result<f64> {
    let mut weighted_rewards = 0.0;
    let mut weighted_log_scores = 0.0;
    for report in reports {
        if let Some(entries) = ledgers.get(&report.agent_id) {
            for entry in entries.iter().filter(|e| e.time <= report.time) {
                weighted_rewards += entry.expert_weight * entry.reward;
            }
        }
        let r_j = *report.values.probs().get(type_index).ok_or_else(|| {
            Error::Argument(format!("report has no component for type {type_index}"))
        })?;
        if r_j <= 0.0 {
            return Err(Error::Argument(format!(
                "report component {r_j} must be positive"
            )));
        }
        weighted_log_scores += report.expert_weight * r_j.ln();
    }
    Ok(weighted_rewards + varpi * weighted_log_scores)
}

/// Aggregates one step's reports into the market belief.
///
/// Computed in log space: B_j is proportional to the product over agents of
/// r_j raised to that agent's expert weight.
pub fn aggregate_beliefs(reports: &[Report]) -> Result<TypeDistribution> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Precondition("no reports to aggregate".into()))?;
    let m = first.values.len();
    let mut log_pool = vec![0.0f64; m];
    for report in reports {
        if report.values.len() != m {
            return Err(Error::Argument(format!(
                "report length {} differs from {m}",
                report.values.len()
            )));
        }
        for (j, r_j) in report.values.iter().enumerate() {
            if r_j <= 0.0 {
                return Err(Error::Precondition(format!(
                    "report component {r_j} for type {j} must be clipped above zero"
                )));
            }
            log_pool[j] += report.expert_weight * r_j.ln();
        }
    }
    let max = log_pool.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_pool.iter().map(|l| (l - max).exp()).collect();
    TypeDistribution::normalize(&weights)
}

/// Expected settlement payment of submitting `report` when the true type is
/// distributed according to `belief`: the belief-weighted payment across
/// types, with `base_reward` standing in for the reward history.
///
/// The truthful optimum holds when all entries of `varpi_by_type` are equal
/// and positive; per-type weights are accepted for realized-decision
/// contexts and adversarial tests.
pub fn expected_payment(
    belief: &TypeDistribution,
    report: &[f64],
    varpi_by_type: &[f64],
    base_reward: f64,
) -> Result<f64> {
    let m = belief.len();
    if report.len() != m || varpi_by_type.len() != m {
        return Err(Error::Argument(format!(
            "length mismatch: belief {m}, report {}, weights {}",
            report.len(),
            varpi_by_type.len()
        )));
    }
    let mut eu = 0.0;
    for (j, &r_j) in report.iter().enumerate() {
        if r_j <= 0.0 {
            return Err(Error::Argument(format!(
                "report component {r_j} for type {j} must be positive"
            )));
        }
        eu += belief.get(j) * (base_reward + varpi_by_type[j] * r_j.ln());
    }
    Ok(eu)
}

/// Settles the market once the object's window is closed: every reporting
/// agent receives its reward history plus the decision score of its final
/// report at the revealed true type.
pub fn settle_market(
    state: &MarketState,
    true_type: usize,
    model: &DecisionModel,
) -> Result<BTreeMap<String, Settlement>> {
    if !state.is_closed() {
        return Err(Error::State(
            "cannot settle before the object's time window closes".into(),
        ));
    }
    let varpi = decision_weight(state.decisions(), true_type, model)?;
    let mut settlements = BTreeMap::new();
    for (agent_id, entries) in state.ledgers() {
        let last = state
            .last_report_of(agent_id)
            .ok_or_else(|| Error::State(format!("ledger entry without report for {agent_id}")))?;
        let rewards: Vec<f64> = entries.iter().map(|e| e.reward).collect();
        let score = score_report(last.values.get(true_type), varpi)?;
        let total = payment(&rewards, score);
        settlements.insert(
            agent_id.clone(),
            Settlement {
                rewards_sum: rewards.iter().sum(),
                score,
                total,
            },
        );
    }
    Ok(settlements)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::agent::{make_report, Strategy};
    use crate::types::SensorType;

    fn record(decision_id: usize) -> DecisionRecord {
        DecisionRecord {
            time: 1,
            decision_id,
            expected_utility: 0.0,
            deployed: BTreeMap::new(),
            shortfall: BTreeMap::new(),
        }
    }

    fn report(agent: &str, time: u32, values: Vec<f64>, weight: f64) -> Report {
        Report {
            agent_id: agent.into(),
            time,
            values: TypeDistribution::new(values).unwrap(),
            expert_weight: weight,
        }
    }

    #[test]
    fn decision_weight_sums_probability_utility_products() {
        let model = DecisionModel {
            p_table: vec![vec![0.5], vec![0.3]],
            utilities: vec![10.0],
        };
        let one = decision_weight(&[record(0)], 0, &model).unwrap();
        assert_abs_diff_eq!(one, 5.0, epsilon = 1e-12);
        let two = decision_weight(&[record(0), record(1)], 0, &model).unwrap();
        assert_abs_diff_eq!(two, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn decision_weight_floors_at_epsilon() {
        let model = DecisionModel {
            p_table: vec![vec![0.5]],
            utilities: vec![0.0],
        };
        assert_abs_diff_eq!(decision_weight(&[record(0)], 0, &model).unwrap(), EPS_WEIGHT);
        assert_abs_diff_eq!(decision_weight(&[], 0, &model).unwrap(), EPS_WEIGHT);
    }

    #[test]
    fn score_report_matches_hand_values() {
        assert_abs_diff_eq!(score_report(1.0, 7.0).unwrap(), 0.0);
        assert_abs_diff_eq!(score_report(0.5, 2.0).unwrap(), -1.3863, epsilon = 1e-4);
        assert_abs_diff_eq!(score_report(1e-6, 1.0).unwrap(), -13.8155, epsilon = 1e-4);
    }

    #[test]
    fn score_report_rejects_unclipped_or_unweighted_input() {
        assert!(matches!(score_report(1e-9, 1.0), Err(Error::Argument(_))));
        assert!(matches!(score_report(1.5, 1.0), Err(Error::Argument(_))));
        assert!(matches!(score_report(0.5, 0.0), Err(Error::Argument(_))));
        assert!(matches!(score_report(0.5, -1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn payment_adds_rewards_and_score() {
        assert_abs_diff_eq!(payment(&[3.0, 2.0], -1.3863), 3.6137, epsilon = 1e-12);
        assert_abs_diff_eq!(payment(&[], 0.0), 0.0);
        assert_abs_diff_eq!(payment(&[-1.0], -13.8155), -14.8155, epsilon = 1e-12);
    }

    #[test]
    fn average_payment_matches_hand_arithmetic() {
        let mut ledgers = BTreeMap::new();
        ledgers.insert(
            "a".to_string(),
            vec![LedgerEntry {
                time: 1,
                expert_weight: 1.0,
                reward: 2.0,
            }],
        );
        let reports = vec![report("a", 1, vec![0.5, 0.5], 1.0)];
        let out = average_payment(&reports, &ledgers, 1.0, 0).unwrap();
        assert_abs_diff_eq!(out, 2.0 + 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_weights_annihilate_the_average_payment() {
        let mut ledgers = BTreeMap::new();
        ledgers.insert(
            "a".to_string(),
            vec![LedgerEntry {
                time: 1,
                expert_weight: 0.0,
                reward: 4.0,
            }],
        );
        let reports = vec![report("a", 1, vec![0.5, 0.5], 0.0)];
        let out = average_payment(&reports, &ledgers, 3.0, 0).unwrap();
        assert_abs_diff_eq!(out, 0.0);
    }

    #[test]
    fn average_payment_two_agents() {
        let mut ledgers = BTreeMap::new();
        for id in ["a", "b"] {
            ledgers.insert(
                id.to_string(),
                vec![LedgerEntry {
                    time: 1,
                    expert_weight: 1.0,
                    reward: 1.0,
                }],
            );
        }
        let reports = vec![
            report("a", 1, vec![0.5, 0.5], 1.0),
            report("b", 1, vec![0.25, 0.75], 1.0),
        ];
        let out = average_payment(&reports, &ledgers, 2.0, 0).unwrap();
        assert_abs_diff_eq!(
            out,
            2.0 + 2.0 * (0.5f64.ln() + 0.25f64.ln()),
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_report_aggregates_to_itself() {
        let b = aggregate_beliefs(&[report("a", 1, vec![0.7, 0.3], 1.0)]).unwrap();
        assert_abs_diff_eq!(b.get(0), 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(b.get(1), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn uniform_reports_are_neutral_in_the_pool() {
        let b = aggregate_beliefs(&[
            report("a", 1, vec![0.8, 0.2], 1.0),
            report("b", 1, vec![0.5, 0.5], 1.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(b.get(0), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(b.get(1), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn fractional_weights_temper_the_pool() {
        let b = aggregate_beliefs(&[
            report("a", 1, vec![0.8, 0.2], 0.5),
            report("b", 1, vec![0.5, 0.5], 0.5),
        ])
        .unwrap();
        assert_abs_diff_eq!(b.get(0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.get(1), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_report_list_is_rejected() {
        assert!(matches!(
            aggregate_beliefs(&[]),
            Err(Error::Precondition(_))
        ));
    }

    fn model() -> DecisionModel {
        DecisionModel {
            p_table: vec![vec![0.6, 0.3, 0.1]],
            utilities: vec![10.0, 6.0, 6.0],
        }
    }

    #[test]
    fn settlement_requires_a_closed_window() {
        let mut state = MarketState::new("obj");
        state
            .record_step(vec![report("a", 1, vec![0.7, 0.2, 0.1], 1.0)], &[3.0])
            .unwrap();
        state.record_decision(record(0));
        assert!(matches!(
            settle_market(&state, 0, &model()),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn perfect_final_report_pays_exactly_the_rewards() {
        let mut state = MarketState::new("obj");
        state
            .record_step(vec![report("a", 1, vec![1.0, 0.0, 0.0], 1.0)], &[3.0])
            .unwrap();
        state.record_decision(record(0));
        state.close_window();
        let settlements = settle_market(&state, 0, &model()).unwrap();
        let s = &settlements["a"];
        assert_abs_diff_eq!(s.score, 0.0);
        assert_abs_diff_eq!(s.total, 3.0);
    }

    #[test]
    fn truthful_agent_outearns_malicious_agent_on_same_rewards() {
        let belief = TypeDistribution::new(vec![0.7, 0.2, 0.1]).unwrap();
        let truthful = make_report(&belief, Strategy::Truthful, REPORT_FLOOR).unwrap();
        let malicious = make_report(&belief, Strategy::Malicious, REPORT_FLOOR).unwrap();
        let mut state = MarketState::new("obj");
        state
            .record_step(
                vec![
                    Report {
                        agent_id: "t".into(),
                        time: 1,
                        values: truthful,
                        expert_weight: 1.0,
                    },
                    Report {
                        agent_id: "m".into(),
                        time: 1,
                        values: malicious,
                        expert_weight: 1.0,
                    },
                ],
                &[2.0, 2.0],
            )
            .unwrap();
        state.record_decision(record(0));
        state.close_window();
        let settlements = settle_market(&state, 0, &model()).unwrap();
        assert!(settlements["t"].total > settlements["m"].total);
        assert!(!settlements.contains_key("absent"));
    }

    #[test]
    fn expected_payment_prefers_truth_for_scalar_weights() {
        let b = TypeDistribution::new(vec![0.6, 0.3, 0.1]).unwrap();
        let varpi = vec![2.5; 3];
        let clipped = b.clipped(REPORT_FLOOR).unwrap();
        let honest = expected_payment(&b, clipped.probs(), &varpi, 1.0).unwrap();
        for other in [
            [0.3, 0.6, 0.1],
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [0.05, 0.05, 0.9],
        ] {
            let eu = expected_payment(&b, &other, &varpi, 1.0).unwrap();
            assert!(honest >= eu - 1e-9, "honest {honest} vs {eu}");
        }
    }

    #[test]
    fn each_ledger_entry_matches_one_report() {
        let mut state = MarketState::new("obj");
        for t in 1..=3u32 {
            state
                .record_step(vec![report("a", t, vec![0.6, 0.4], 1.0)], &[1.5])
                .unwrap();
        }
        assert_eq!(state.ledger("a").unwrap().len(), 3);
        assert_eq!(
            state
                .reports_by_step()
                .iter()
                .map(|s| s.iter().filter(|r| r.agent_id == "a").count())
                .sum::<usize>(),
            3
        );
    }

    proptest! {
        #[test]
        fn score_is_strictly_increasing_in_the_report(
            lo in 1e-5f64..0.5,
            delta in 1e-6f64..0.49,
            varpi in 0.1f64..10.0,
        ) {
            let hi = lo + delta;
            prop_assert!(score_report(hi, varpi).unwrap() > score_report(lo, varpi).unwrap());
        }

        #[test]
        fn identical_reports_with_unit_total_weight_pool_to_themselves(
            raw in prop::collection::vec(0.05f64..1.0, 2..5),
            n_agents in 2usize..6,
            split in 0.1f64..0.9,
        ) {
            // weights over agents summing to one: geometric-mean idempotence
            let values = TypeDistribution::normalize(&raw).unwrap();
            let mut weights = vec![split / (n_agents - 1) as f64; n_agents];
            weights[0] = 1.0 - split;
            let reports: Vec<Report> = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| report(&format!("a{i}"), 1, values.probs().to_vec(), w))
                .collect();
            let pooled = aggregate_beliefs(&reports).unwrap();
            for (x, y) in pooled.iter().zip(values.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn aggregation_always_lands_on_the_simplex(
            rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..8),
            weights in prop::collection::vec(0.05f64..1.0, 8),
        ) {
            let reports: Vec<Report> = rows
                .iter()
                .enumerate()
                .map(|(i, raw)| {
                    let values = TypeDistribution::normalize(raw).unwrap();
                    Report {
                        agent_id: format!("a{i}"),
                        time: 1,
                        values,
                        expert_weight: weights[i],
                    }
                })
                .collect();
            let pooled = aggregate_beliefs(&reports).unwrap();
            prop_assert!((pooled.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn sensor_type_labels_are_stable() {
        assert_eq!(SensorType::Md.label(), "md");
    }
}
