//! Command-line front end: seeded simulation runs, the standalone incentive
//! suites and the aggregation oracle check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use beliefmarket_core::export::emit_results;
use beliefmarket_core::scenario::ScenarioConfig;
use beliefmarket_core::sim::{run_experiment, MetricKind};
use beliefmarket_core::verify::{
    aggregation_oracle_suite, properness_suite, truthful_optimum_suite,
};
use beliefmarket_core::FusionMethod;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pm,
    Ds,
    Ddf,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<FusionMethod> {
        match self {
            MethodArg::Pm => vec![FusionMethod::Pm],
            MethodArg::Ds => vec![FusionMethod::Ds],
            MethodArg::Ddf => vec![FusionMethod::Ddf],
            MethodArg::All => FusionMethod::ALL.to_vec(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "beliefmarket",
    version,
    about = "Prediction-market belief aggregation for multi-sensor object classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded episodes for one or all fusion methods and export CSV
    /// results.
    Simulate {
        /// Scenario TOML document.
        #[arg(long)]
        scenario: PathBuf,
        /// Fusion method to run.
        #[arg(long, value_enum, default_value = "all")]
        method: MethodArg,
        /// Override the scenario's run count.
        #[arg(long)]
        runs: Option<u32>,
        /// Override the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for metrics.csv, deployments.csv,
        /// settlements.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the properness and truthful-optimum suites standalone.
    VerifyIncentives {
        /// Number of random instances per suite.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Compare the log-pool aggregation against the literal average-payment
    /// inverse.
    OracleCheck {
        /// Number of random report sets.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn simulate(
    scenario: &Path,
    method: MethodArg,
    runs: Option<u32>,
    seed: Option<u64>,
    out: &Path,
) -> anyhow::Result<()> {
    let mut config = ScenarioConfig::load(scenario)
        .with_context(|| format!("loading scenario {}", scenario.display()))?;
    if let Some(runs) = runs {
        config.experiment.runs = runs;
    }
    if let Some(seed) = seed {
        config.experiment.seed = seed;
    }
    let compiled = config.compile().context("compiling scenario")?;
    let methods = method.methods();
    let result = run_experiment(&compiled, &methods).context("running experiment")?;

    println!(
        "ran {} episodes ({} objects x {} runs x {} methods), window T={}",
        result.episodes.len(),
        compiled.objects.len(),
        compiled.runs,
        methods.len(),
        compiled.max_steps
    );
    for &m in &methods {
        let (steps_mean, steps_sd) = result.steps_summary(m, None);
        let episodes: Vec<_> = result.episodes_of(m).collect();
        let correct = episodes
            .iter()
            .filter(|e| e.predicted_type == e.true_type)
            .count();
        println!(
            "  {m}: mean steps {steps_mean:.2} (sd {steps_sd:.2}), mean final rmse {:.4}, accuracy {:.1}%",
            result.mean_final_rmse(m),
            100.0 * correct as f64 / episodes.len() as f64
        );
        for object_id in result.episodes.iter().map(|e| e.object_id.clone()).collect::<std::collections::BTreeSet<_>>() {
            let (mean, sd) = result.steps_summary(m, Some(&object_id));
            println!("    {object_id}: steps {mean:.2} (sd {sd:.2})");
        }
        let curve = result.metric_curve(m, MetricKind::Rmse);
        let trail: Vec<String> = curve.iter().map(|s| format!("{:.3}", s.mean)).collect();
        println!("    rmse curve: {}", trail.join(" "));
    }
    let files = emit_results(&result, out).context("writing results")?;
    for file in files {
        println!("wrote {}", file.display());
    }
    Ok(())
}

fn verify_incentives(samples: usize, seed: u64) -> anyhow::Result<()> {
    let properness = properness_suite(samples, 100, seed)?;
    println!(
        "properness: {} instances, {} comparisons, max violation {:.3e}",
        properness.instances, properness.comparisons, properness.max_violation
    );
    let truthfulness = truthful_optimum_suite(samples, seed.wrapping_add(1))?;
    println!(
        "truthful optimum: {} instances, max L-inf deviation {:.3e}",
        truthfulness.instances, truthfulness.max_linf_deviation
    );
    if properness.max_violation > 1e-9 {
        bail!(
            "properness violated by {:.3e} (tolerance 1e-9)",
            properness.max_violation
        );
    }
    if truthfulness.max_linf_deviation > 1e-3 {
        bail!(
            "truthful optimum off by {:.3e} (tolerance 1e-3)",
            truthfulness.max_linf_deviation
        );
    }
    println!("incentive suites passed");
    Ok(())
}

fn oracle_check(samples: usize, seed: u64) -> anyhow::Result<()> {
    let report = aggregation_oracle_suite(samples, seed)?;
    println!(
        "aggregation oracle: {} samples, literal gap {:.3e}, invariance gap {:.3e}",
        report.samples, report.max_literal_gap, report.max_invariance_gap
    );
    if report.max_literal_gap > 1e-9 {
        bail!(
            "log-pool aggregation diverges from the literal form by {:.3e} (tolerance 1e-9)",
            report.max_literal_gap
        );
    }
    if report.max_invariance_gap > 1e-12 {
        bail!(
            "aggregation depends on rewards or decision weights: gap {:.3e} (tolerance 1e-12)",
            report.max_invariance_gap
        );
    }
    println!("aggregation oracle passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate {
            scenario,
            method,
            runs,
            seed,
            out,
        } => simulate(scenario, *method, *runs, *seed, out),
        Command::VerifyIncentives { samples, seed } => verify_incentives(*samples, *seed),
        Command::OracleCheck { samples, seed } => oracle_check(*samples, *seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
