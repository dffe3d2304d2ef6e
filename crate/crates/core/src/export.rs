//! Flat-file result export: per-step metric statistics, deployment
//! schedules and settlement breakdowns, all with stable column order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sim::{EpisodeRecord, ExperimentResult, MetricKind};
use crate::types::{FusionMethod, SensorType};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn methods_present(result: &ExperimentResult) -> Vec<FusionMethod> {
    FusionMethod::ALL
        .into_iter()
        .filter(|&m| result.episodes_of(m).next().is_some())
        .collect()
}

fn metrics_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("time,method,metric,mean,stdev\n");
    for method in methods_present(result) {
        for kind in MetricKind::ALL {
            for stat in result.metric_curve(method, kind) {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6}",
                    stat.time,
                    method,
                    kind.label(),
                    stat.mean,
                    stat.stdev
                );
            }
        }
    }
    out
}

/// Per-step deployment rows for one episode: the cumulative number of
/// perceiving sensors and the sensors that joined at each step.
fn deployment_rows(episode: &EpisodeRecord) -> Vec<(u32, u32, [u32; 3])> {
    let mut rows = Vec::with_capacity(episode.steps.len());
    let mut cumulative = 0u32;
    // sensors deployed at step t-1 begin perceiving at step t; the
    // bootstrap MD sensor is the step-1 addition
    let mut incoming: [u32; 3] = [1, 0, 0];
    for step in &episode.steps {
        cumulative += incoming.iter().sum::<u32>();
        rows.push((step.time, cumulative, incoming));
        incoming = [
            step.decision.deployed_count(SensorType::Md),
            step.decision.deployed_count(SensorType::Ir),
            step.decision.deployed_count(SensorType::Gpr),
        ];
    }
    rows
}

fn deployments_csv(result: &ExperimentResult) -> String {
    let mut out = String::from("object_type,method,run,step,cumulative,added_md,added_ir,added_gpr\n");
    for episode in &result.episodes {
        let object_type = &result.type_names[episode.true_type];
        for (step, cumulative, [md, ir, gpr]) in deployment_rows(episode) {
            let _ = writeln!(
                out,
                "{object_type},{},{},{step},{cumulative},{md},{ir},{gpr}",
                episode.method, episode.run
            );
        }
    }
    out
}

fn settlements_csv(result: &ExperimentResult) -> String {
    let mut out =
        String::from("object_type,method,run,agent_id,sensor_type,strategy,rewards_sum,score,total\n");
    for episode in &result.episodes {
        let Some(settlement) = &episode.settlement else {
            continue;
        };
        let object_type = &result.type_names[episode.true_type];
        for (agent_id, row) in settlement {
            let strategy = match row.strategy {
                crate::agent::Strategy::Truthful => "truthful",
                crate::agent::Strategy::Malicious => "malicious",
            };
            let _ = writeln!(
                out,
                "{object_type},{},{},{agent_id},{},{strategy},{:.6},{:.6},{:.6}",
                episode.method, episode.run, row.sensor_type, row.rewards_sum, row.score, row.total
            );
        }
    }
    out
}

/// Writes the three result tables into `out_dir`, creating it if needed.
/// Returns the written paths in a stable order.
pub fn emit_results(result: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let files = [
        ("metrics.csv", metrics_csv(result)),
        ("deployments.csv", deployments_csv(result)),
        ("settlements.csv", settlements_csv(result)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = out_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}
