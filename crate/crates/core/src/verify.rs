//! Independent numerical checks of the market mechanism.
//!
//! The aggregation oracle evaluates the generalized inverse of the average
//! payment literally (build the weighted average, subtract the weighted
//! rewards, divide by the decision weight, exponentiate, normalize) and
//! compares it against the production log-pool path. The incentive suites
//! sample random instances to confirm that truthful reporting maximizes the
//! expected payment, using a dense grid search as the maximization oracle.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agent::{Report, REPORT_FLOOR};
use crate::error::{Error, Result};
use crate::market::{self, LedgerEntry};
use crate::types::TypeDistribution;

/// Literal evaluation of the aggregation inverse, routed through the
/// average-payment implementation so the cancellation of rewards and
/// decision weights is exercised rather than assumed.
pub fn aggregate_beliefs_literal(
    reports: &[Report],
    ledgers: &BTreeMap<String, Vec<LedgerEntry>>,
    varpi_by_type: &[f64],
) -> Result<TypeDistribution> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Precondition("no reports to aggregate".into()))?;
    let m = first.values.len();
    if varpi_by_type.len() != m {
        return Err(Error::Argument(format!(
            "{} decision weights for {m} types",
            varpi_by_type.len()
        )));
    }
    let mut weights = vec![0.0f64; m];
    for j in 0..m {
        let varpi = varpi_by_type[j];
        if varpi <= 0.0 || varpi.is_nan() {
            return Err(Error::Argument(format!(
                "decision weight {varpi} must be positive"
            )));
        }
        let psi_ave = market::average_payment(reports, ledgers, varpi, j)?;
        let weighted_rewards = market::average_payment(reports, ledgers, 0.0, j)?;
        weights[j] = ((psi_ave - weighted_rewards) / varpi).exp();
    }
    TypeDistribution::normalize(&weights)
}

/// Outcome of the literal-versus-simplified aggregation comparison.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    /// Largest componentwise gap between the log-pool and the literal form.
    pub max_literal_gap: f64,
    /// Largest componentwise change when rewards and decision weights are
    /// redrawn (both cancel, so this should be noise).
    pub max_invariance_gap: f64,
}

/// Outcome of the properness sampling suite.
#[derive(Debug, Clone, Serialize)]
pub struct PropernessReport {
    pub instances: usize,
    pub comparisons: usize,
    /// Largest advantage any sampled report achieved over the truthful one;
    /// properness means this never meaningfully exceeds zero.
    pub max_violation: f64,
}

/// Outcome of the truthful-optimum grid search suite.
#[derive(Debug, Clone, Serialize)]
pub struct TruthfulnessReport {
    pub instances: usize,
    /// Largest L-infinity distance between the grid argmax and the belief.
    pub max_linf_deviation: f64,
}

fn random_simplex<R: Rng>(m: usize, rng: &mut R) -> TypeDistribution {
    let raw: Vec<f64> = (0..m)
        .map(|_| (-(1.0 - rng.random::<f64>()).ln()).max(1e-9))
        .collect();
    TypeDistribution::normalize(&raw).expect("positive components")
}

fn random_clipped_report<R: Rng>(m: usize, rng: &mut R) -> TypeDistribution {
    random_simplex(m, rng)
        .clipped(REPORT_FLOOR)
        .expect("floor below 1/m")
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn random_ledgers<R: Rng>(
    reports: &[Report],
    rng: &mut R,
) -> BTreeMap<String, Vec<LedgerEntry>> {
    let mut ledgers = BTreeMap::new();
    for report in reports {
        let entries = (1..=report.time)
            .map(|time| LedgerEntry {
                time,
                expert_weight: open_unit(rng),
                reward: rng.random_range(-5.0..5.0),
            })
            .collect();
        ledgers.insert(report.agent_id.clone(), entries);
    }
    ledgers
}

/// Compares the simplified aggregation against the literal inverse on
/// random report sets, and checks that redrawing rewards and decision
/// weights leaves the literal result unchanged.
pub fn aggregation_oracle_suite(samples: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_literal_gap = 0.0f64;
    let mut max_invariance_gap = 0.0f64;
    for _ in 0..samples {
        let m = rng.random_range(2..=4);
        let n_agents = rng.random_range(2..=10);
        let time = rng.random_range(1..=5);
        let reports: Vec<Report> = (0..n_agents)
            .map(|i| Report {
                agent_id: format!("agent-{i}"),
                time,
                values: random_clipped_report(m, &mut rng),
                expert_weight: open_unit(&mut rng),
            })
            .collect();
        let ledgers = random_ledgers(&reports, &mut rng);
        let varpi: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..10.0)).collect();

        let simplified = market::aggregate_beliefs(&reports)?;
        let literal = aggregate_beliefs_literal(&reports, &ledgers, &varpi)?;
        for (a, b) in simplified.iter().zip(literal.iter()) {
            max_literal_gap = max_literal_gap.max((a - b).abs());
        }

        let ledgers_redrawn = random_ledgers(&reports, &mut rng);
        let varpi_redrawn: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..10.0)).collect();
        let literal_redrawn =
            aggregate_beliefs_literal(&reports, &ledgers_redrawn, &varpi_redrawn)?;
        for (a, b) in literal.iter().zip(literal_redrawn.iter()) {
            max_invariance_gap = max_invariance_gap.max((a - b).abs());
        }
    }
    Ok(OracleReport {
        samples,
        max_literal_gap,
        max_invariance_gap,
    })
}

/// Samples random (belief, report) pairs and records the largest expected
/// advantage of any report over the truthful one.
pub fn properness_suite(
    instances: usize,
    reports_per_instance: usize,
    seed: u64,
) -> Result<PropernessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..instances {
        let m = rng.random_range(2..=3);
        let belief = random_simplex(m, &mut rng);
        let varpi = vec![10.0 * open_unit(&mut rng); m];
        let base = rng.random_range(-10.0..10.0);
        let honest = belief.clipped(REPORT_FLOOR)?;
        let eu_honest = market::expected_payment(&belief, honest.probs(), &varpi, base)?;
        for _ in 0..reports_per_instance {
            let candidate = random_clipped_report(m, &mut rng);
            let eu = market::expected_payment(&belief, candidate.probs(), &varpi, base)?;
            max_violation = max_violation.max(eu - eu_honest);
        }
    }
    Ok(PropernessReport {
        instances,
        comparisons: instances * reports_per_instance,
        max_violation,
    })
}

/// Dense grid argmax over the 2-simplex edge or the 3-simplex face.
///
/// The grid includes the report floor itself so optima close to the
/// boundary are reachable; a refinement pass narrows to the stated
/// tolerance.
fn grid_argmax(m: usize, eval: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    const FLOOR: f64 = REPORT_FLOOR;
    match m {
        2 => {
            let mut best = vec![0.5, 0.5];
            let mut best_eu = f64::NEG_INFINITY;
            let mut consider = |x: f64| {
                let x = x.clamp(FLOOR, 1.0 - FLOOR);
                let point = [x, 1.0 - x];
                let eu = eval(&point);
                if eu > best_eu {
                    best_eu = eu;
                    best = point.to_vec();
                }
            };
            consider(FLOOR);
            let mut k = 1;
            while (k as f64) * 1e-4 < 1.0 {
                consider((k as f64) * 1e-4);
                k += 1;
            }
            consider(1.0 - FLOOR);
            best
        }
        3 => {
            // the coarse pass spans the whole face; the refinement pass
            // narrows to well inside the 1e-3 tolerance
            let coarse = refine_pass_m3(&[0.5, 0.5, 0.0], 1.0, 0.0125, eval);
            refine_pass_m3(&coarse, 0.02, 5e-4, eval)
        }
        _ => panic!("grid search supports m = 2 or 3"),
    }
}

fn refine_pass_m3(
    center: &[f64],
    radius: f64,
    step: f64,
    eval: &dyn Fn(&[f64]) -> f64,
) -> Vec<f64> {
    const FLOOR: f64 = REPORT_FLOOR;
    let mut best = center.to_vec();
    let mut best_eu = f64::NEG_INFINITY;
    let lo = |c: f64| (c - radius).max(FLOOR);
    let hi = |c: f64| (c + radius).min(1.0);
    let mut x = lo(center[0]);
    while x <= hi(center[0]) {
        let mut y = lo(center[1]);
        while y <= hi(center[1]) {
            let z = 1.0 - x - y;
            if z >= FLOOR {
                let point = [x, y, z];
                let eu = eval(&point);
                if eu > best_eu {
                    best_eu = eu;
                    best = point.to_vec();
                }
            }
            y += step;
        }
        x += step;
    }
    best
}

/// Numerically maximizes the expected payment over the simplex for random
/// instances and measures how far the argmax sits from the belief.
pub fn truthful_optimum_suite(instances: usize, seed: u64) -> Result<TruthfulnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_dev = 0.0f64;
    for _ in 0..instances {
        let m = rng.random_range(2..=3);
        let belief = random_simplex(m, &mut rng);
        let varpi = vec![10.0 * open_unit(&mut rng); m];
        let base = rng.random_range(-10.0..10.0);
        let eval = |point: &[f64]| -> f64 {
            market::expected_payment(&belief, point, &varpi, base)
                .expect("positive grid components")
        };
        let argmax = grid_argmax(m, &eval);
        for (r, b) in argmax.iter().zip(belief.iter()) {
            max_dev = max_dev.max((r - b).abs());
        }
    }
    Ok(TruthfulnessReport {
        instances,
        max_linf_deviation: max_dev,
    })
}
