//! Sensor-agent state and behavior: belief updating, report strategies and
//! reward accounting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market;
use crate::types::{SensorType, SensorTypeSpec, TypeDistribution};

/// Floor applied to report components before logarithmic scoring.
pub const REPORT_FLOOR: f64 = 1e-6;

/// How an agent derives its report from its belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Report the belief exactly.
    Truthful,
    /// Swap the two largest belief components to mislead aggregation.
    Malicious,
}

/// Parameters of the piecewise report-value function: a constant value up to
/// a threshold count, then a linear decline reaching zero at `n_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionParams {
    pub nu: u32,
    pub n_threshold: u32,
    pub n_max: u32,
}

impl ValueFunctionParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_threshold == 0 || self.n_threshold >= self.n_max {
            return Err(Error::Config(format!(
                "report-value thresholds must satisfy 0 < n_threshold < n_max, got {} and {}",
                self.n_threshold, self.n_max
            )));
        }
        if self.nu == 0 {
            return Err(Error::Config("report value nu must be positive".into()));
        }
        Ok(())
    }
}

/// Mutable state of one sensor agent over an episode.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: String,
    pub sensor_type: SensorType,
    pub strategy: Strategy,
    pub belief: TypeDistribution,
    /// Number of reports submitted so far.
    pub reports_made: u32,
    pub cumulative_reward: f64,
    /// Weight on the private signal posterior in the belief update.
    pub w_bel: f64,
}

/// One submitted report together with the expert weight attached to it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub agent_id: String,
    pub time: u32,
    pub values: TypeDistribution,
    pub expert_weight: f64,
}

/// Mixes the private signal posterior with the market's aggregate belief:
/// `w_bel * posterior + (1 - w_bel) * aggregate`, componentwise.
pub fn update_belief(
    signal_posterior: &TypeDistribution,
    market_belief: &TypeDistribution,
    w_bel: f64,
) -> Result<TypeDistribution> {
    if !(0.0..=1.0).contains(&w_bel) {
        return Err(Error::Argument(format!(
            "belief weight {w_bel} outside [0, 1]"
        )));
    }
    if signal_posterior.len() != market_belief.len() {
        return Err(Error::Argument(format!(
            "distribution lengths differ: {} vs {}",
            signal_posterior.len(),
            market_belief.len()
        )));
    }
    let probs = signal_posterior
        .iter()
        .zip(market_belief.iter())
        .map(|(p, b)| w_bel * p + (1.0 - w_bel) * b)
        .collect();
    TypeDistribution::new(probs)
}

/// Value of the n-th report: constant `nu` up to the threshold, then a
/// linear decline hitting zero at `n_max` and going negative beyond it.
pub fn report_value(n: u32, params: &ValueFunctionParams) -> f64 {
    let nu = f64::from(params.nu);
    if n <= params.n_threshold {
        nu
    } else {
        nu * (f64::from(n) - f64::from(params.n_max))
            / (f64::from(params.n_threshold) - f64::from(params.n_max))
    }
}

/// Cost of submitting one report; constant per sensor kind, independent of
/// the report contents.
pub fn report_cost(spec: &SensorTypeSpec) -> f64 {
    spec.report_cost
}

/// Instantaneous reward for one report: value minus cost, possibly negative.
pub fn instantaneous_reward(value: f64, cost: f64) -> f64 {
    value - cost
}

/// Swaps the two largest components (lowest indices on ties).
fn swap_top_two(belief: &TypeDistribution) -> Vec<f64> {
    let mut probs = belief.probs().to_vec();
    if probs.len() < 2 {
        return probs;
    }
    let mut first = 0usize;
    for j in 1..probs.len() {
        if probs[j] > probs[first] {
            first = j;
        }
    }
    let mut second = usize::MAX;
    for j in 0..probs.len() {
        if j == first {
            continue;
        }
        if second == usize::MAX || probs[j] > probs[second] {
            second = j;
        }
    }
    probs.swap(first, second);
    probs
}

/// Turns a belief into a report according to the strategy, flooring every
/// component at `floor` and renormalizing so log scores stay finite.
pub fn make_report(
    belief: &TypeDistribution,
    strategy: Strategy,
    floor: f64,
) -> Result<TypeDistribution> {
    let raw = match strategy {
        Strategy::Truthful => belief.clone(),
        Strategy::Malicious => TypeDistribution::new(swap_top_two(belief))?,
    };
    raw.clipped(floor)
}

/// Everything an agent needs from the market to evaluate a candidate report:
/// the per-type decision weights published by the market maker and the
/// remaining horizon over which it expects to keep reporting.
#[derive(Debug, Clone)]
pub struct StrategyContext {
    /// Decision weight for each object type at settlement.
    pub varpi_by_type: Vec<f64>,
    /// Current time step.
    pub time: u32,
    /// Object time window T.
    pub horizon: u32,
    pub value_params: ValueFunctionParams,
    pub report_cost: f64,
    pub report_floor: f64,
}

/// Picks the candidate strategy with the highest expected utility, assuming
/// the agent keeps submitting similar reports until the window closes and
/// treating its own belief as the distribution over outcomes. Ties go to
/// the truthful strategy.
pub fn choose_strategy(
    agent: &AgentState,
    candidates: &[Strategy],
    ctx: &StrategyContext,
) -> Result<Strategy> {
    if candidates.is_empty() {
        return Err(Error::Precondition("no candidate strategies".into()));
    }
    if ctx.varpi_by_type.len() != agent.belief.len() {
        return Err(Error::Argument(format!(
            "{} decision weights for {} types",
            ctx.varpi_by_type.len(),
            agent.belief.len()
        )));
    }

    // rewards accrue identically under both strategies: the remaining
    // reports run from the current step through the horizon
    let remaining = ctx.horizon.saturating_sub(ctx.time) + 1;
    let mut base = agent.cumulative_reward;
    for k in 1..=remaining {
        let value = report_value(agent.reports_made + k, &ctx.value_params);
        base += instantaneous_reward(value, ctx.report_cost);
    }

    let mut ordered: Vec<Strategy> = candidates.to_vec();
    ordered.sort_by_key(|s| match s {
        Strategy::Truthful => 0,
        Strategy::Malicious => 1,
    });
    ordered.dedup();

    let mut best = ordered[0];
    let mut best_eu = f64::NEG_INFINITY;
    for &strategy in &ordered {
        let report = make_report(&agent.belief, strategy, ctx.report_floor)?;
        let eu =
            market::expected_payment(&agent.belief, report.probs(), &ctx.varpi_by_type, base)?;
        if eu > best_eu {
            best_eu = eu;
            best = strategy;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::Strategy;
    use super::*;

    fn params() -> ValueFunctionParams {
        ValueFunctionParams {
            nu: 5,
            n_threshold: 5,
            n_max: 20,
        }
    }

    #[test]
    fn belief_update_mixes_componentwise() {
        let p = TypeDistribution::new(vec![0.6, 0.4]).unwrap();
        let b = TypeDistribution::new(vec![0.2, 0.8]).unwrap();
        let out = update_belief(&p, &b, 0.5).unwrap();
        assert_abs_diff_eq!(out.get(0), 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(out.get(1), 0.6, epsilon = 1e-12);
        assert_eq!(update_belief(&p, &b, 1.0).unwrap(), p);
        assert_eq!(update_belief(&p, &b, 0.0).unwrap(), b);
    }

    #[test]
    fn report_value_is_constant_then_linear() {
        let p = params();
        assert_abs_diff_eq!(report_value(3, &p), 5.0);
        assert_abs_diff_eq!(report_value(20, &p), 0.0);
        assert_abs_diff_eq!(report_value(10, &p), 10.0 / 3.0, epsilon = 1e-12);
        // continuous at the threshold: both branches evaluate to nu
        assert_abs_diff_eq!(report_value(5, &p), 5.0);
        assert_abs_diff_eq!(
            5.0 * (5.0 - 20.0) / (5.0 - 20.0),
            report_value(5, &p),
            epsilon = 1e-12
        );
    }

    #[test]
    fn instantaneous_reward_is_value_minus_cost() {
        assert_abs_diff_eq!(instantaneous_reward(5.0, 2.0), 3.0);
        assert_abs_diff_eq!(instantaneous_reward(5.0, 5.0), 0.0);
        assert_abs_diff_eq!(
            instantaneous_reward(report_value(10, &params()), 4.0),
            -2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn truthful_report_echoes_the_belief() {
        let b = TypeDistribution::new(vec![0.7, 0.2, 0.1]).unwrap();
        let r = make_report(&b, Strategy::Truthful, REPORT_FLOOR).unwrap();
        for (x, y) in r.iter().zip(b.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
    }

    #[test]
    fn malicious_report_swaps_the_top_two_components() {
        let b = TypeDistribution::new(vec![0.7, 0.2, 0.1]).unwrap();
        let r = make_report(&b, Strategy::Malicious, REPORT_FLOOR).unwrap();
        assert_abs_diff_eq!(r.get(0), 0.2, epsilon = 1e-6);
        assert_abs_diff_eq!(r.get(1), 0.7, epsilon = 1e-6);
        assert_abs_diff_eq!(r.get(2), 0.1, epsilon = 1e-6);
    }

    #[test]
    fn clipping_keeps_one_hot_reports_scoreable() {
        let b = TypeDistribution::one_hot(0, 3).unwrap();
        let r = make_report(&b, Strategy::Truthful, 1e-6).unwrap();
        assert_abs_diff_eq!(r.get(0), 0.999998, epsilon = 1e-5);
        assert!(r.get(1) > 0.0);
        assert!(r.get(2) > 0.0);
    }

    fn context(varpi: f64) -> StrategyContext {
        StrategyContext {
            varpi_by_type: vec![varpi; 3],
            time: 3,
            horizon: 10,
            value_params: params(),
            report_cost: 1.0,
            report_floor: REPORT_FLOOR,
        }
    }

    fn agent(belief: TypeDistribution) -> AgentState {
        AgentState {
            id: "md-0".into(),
            sensor_type: SensorType::Md,
            strategy: Strategy::Truthful,
            belief,
            reports_made: 2,
            cumulative_reward: 8.0,
            w_bel: 0.5,
        }
    }

    const BOTH: [Strategy; 2] = [Strategy::Malicious, Strategy::Truthful];

    #[test]
    fn proper_payment_makes_truthful_reporting_optimal() {
        let a = agent(TypeDistribution::new(vec![0.6, 0.3, 0.1]).unwrap());
        assert_eq!(choose_strategy(&a, &BOTH, &context(2.0)).unwrap(), Strategy::Truthful);
    }

    #[test]
    fn disabled_scoring_ties_break_toward_truthful() {
        let a = agent(TypeDistribution::new(vec![0.6, 0.3, 0.1]).unwrap());
        assert_eq!(choose_strategy(&a, &BOTH, &context(0.0)).unwrap(), Strategy::Truthful);
    }

    #[test]
    fn negated_scoring_rewards_manipulation() {
        let a = agent(TypeDistribution::new(vec![0.7, 0.3]).unwrap());
        let ctx = StrategyContext {
            varpi_by_type: vec![-1.0, -1.0],
            ..context(1.0)
        };
        assert_eq!(choose_strategy(&a, &BOTH, &ctx).unwrap(), Strategy::Malicious);
    }

    #[test]
    fn truthful_dominates_malicious_across_the_belief_grid() {
        // every belief on the m=3 simplex grid with step 0.05
        let steps = 20;
        let ctx = context(1.5);
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let k = steps - i - j;
                let b = TypeDistribution::new(vec![
                    f64::from(i) / f64::from(steps),
                    f64::from(j) / f64::from(steps),
                    f64::from(k) / f64::from(steps),
                ])
                .unwrap();
                let rt = make_report(&b, Strategy::Truthful, REPORT_FLOOR).unwrap();
                let rm = make_report(&b, Strategy::Malicious, REPORT_FLOOR).unwrap();
                let eu_t =
                    market::expected_payment(&b, rt.probs(), &ctx.varpi_by_type, 0.0).unwrap();
                let eu_m =
                    market::expected_payment(&b, rm.probs(), &ctx.varpi_by_type, 0.0).unwrap();
                if rt == rm {
                    assert_abs_diff_eq!(eu_t, eu_m, epsilon = 1e-12);
                } else {
                    assert!(
                        eu_t > eu_m,
                        "belief {:?}: truthful {eu_t} vs malicious {eu_m}",
                        b.probs()
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn report_value_never_increases_with_report_count(n in 1u32..40, step in 0u32..10) {
            let p = params();
            prop_assert!(report_value(n, &p) >= report_value(n + step, &p) - 1e-12);
        }

        #[test]
        fn updated_beliefs_stay_on_the_simplex(
            raw_p in prop::collection::vec(0.01f64..1.0, 3),
            raw_b in prop::collection::vec(0.01f64..1.0, 3),
            w in 0.0f64..=1.0,
        ) {
            let p = TypeDistribution::normalize(&raw_p).unwrap();
            let b = TypeDistribution::normalize(&raw_b).unwrap();
            let out = update_belief(&p, &b, w).unwrap();
            prop_assert!((out.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
