//! Experiment orchestration and the report document.
//!
//! A report keeps releasable outputs (DP-protected or public-data-derived)
//! and evaluation-only outputs (anything touching the raw demand) in
//! separate sub-documents; the releasable sub-document is self-contained.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use dpcluster_core::clustering::{
    dp_cluster_with, raw_weighted_instance, BudgetLedger, CenterWeight, DpClusterOptions,
    ReleasableLog, ThresholdProfile,
};
use dpcluster_core::solvers::{
    BlackBoxSolver, BruteForceSolver, LloydWeightedSolver, LocalSearchSolver,
};
use dpcluster_core::{DiameterMode, Error, MetricInstance, PrivacyBudget, RandomSource};

use crate::config::{ExperimentConfig, InputFormat};
use crate::generate::{generate, GeneratorSpec};
use crate::ingest;
use crate::{HarnessError, Result};

// root-stream children: 0 feeds nothing (the generator consumes the root
// stream itself), trials use 1 + trial index
const TRIAL_STREAM_BASE: u64 = 1;

/// Optimal cost when the brute-force guard admits the instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum OptOutcome {
    Value(f64),
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSummary {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl CostSummary {
    fn from_values(values: &[f64]) -> CostSummary {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        CostSummary {
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        }
    }
}

/// Linear-interpolation quantile of a sorted, nonempty slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// DP-protected outputs of one trial; safe to publish on its own.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleasableTrial {
    pub final_centers: Vec<usize>,
    pub noisy_cost: f64,
    pub noisy_weights: Vec<CenterWeight>,
    pub run_log: ReleasableLog,
}

/// Raw-demand-derived outputs of one trial; for evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationTrial {
    pub true_cost: f64,
    pub opt: OptOutcome,
    pub profile: ThresholdProfile,
    pub budget: BudgetLedger,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub releasable: ReleasableTrial,
    pub evaluation: EvaluationTrial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleasableAggregate {
    pub noisy_cost: CostSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationAggregate {
    pub true_cost: CostSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateStats {
    pub releasable: ReleasableAggregate,
    pub evaluation: EvaluationAggregate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialReport>,
    pub aggregate: AggregateStats,
}

/// Resolves the configured input into an instance: a generator spec is
/// evaluated with the root seed, anything else is treated as a file path.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<MetricInstance> {
    if let Some(spec) = GeneratorSpec::try_parse(&cfg.input) {
        return generate(&spec, cfg.seed, cfg.k, cfg.power);
    }
    let path = PathBuf::from(&cfg.input);
    let format = match cfg.format {
        Some(f) => f,
        None => ingest::infer_format(&path)?,
    };
    ingest::ingest(&path, format, cfg.k, cfg.power)
}

pub fn make_solver(cfg: &ExperimentConfig) -> Result<Box<dyn BlackBoxSolver + Send + Sync>> {
    match cfg.solver.as_str() {
        "brute_force" => Ok(Box::new(BruteForceSolver)),
        "local_search" => Ok(Box::new(LocalSearchSolver { max_iters: cfg.max_iters })),
        "lloyd" => Ok(Box::new(LloydWeightedSolver {
            restarts: cfg.restarts,
            max_iters: cfg.max_iters,
        })),
        other => Err(HarnessError::Config(format!(
            "unknown solver `{other}` (expected brute_force, local_search, or lloyd)"
        ))),
    }
}

fn diameter_mode(cfg: &ExperimentConfig) -> DiameterMode {
    if cfg.approx_diameter {
        DiameterMode::Sweep
    } else {
        DiameterMode::Exact
    }
}

/// Runs `trials` seeded pipeline executions (concurrently up to `jobs`) and
/// assembles the report. Trial order in the report is by trial index
/// regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportDocument> {
    if cfg.trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".to_string()));
    }
    if cfg.jobs == 0 {
        return Err(HarnessError::Config("jobs must be at least 1".to_string()));
    }
    let inst = build_instance(cfg)?;
    let budget = PrivacyBudget::new(cfg.epsilon_p, cfg.delta_p).map_err(HarnessError::Core)?;
    let solver = make_solver(cfg)?;
    let options = DpClusterOptions { diameter_mode: diameter_mode(cfg) };

    // the optimum depends only on the instance, so compute it once
    let opt = match BruteForceSolver.solve(&raw_weighted_instance(&inst)?, &mut RandomSource::new(0))
    {
        Ok(solution) => OptOutcome::Value(solution.cost),
        Err(Error::GuardExceeded(_)) => OptOutcome::Skipped("skipped(guard)".to_string()),
        Err(e) => return Err(e.into()),
    };

    let root = RandomSource::new(cfg.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;

    let trials: Vec<TrialReport> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<TrialReport> {
                let mut rng = root.substream(TRIAL_STREAM_BASE + trial as u64);
                let outcome =
                    dp_cluster_with(&inst, cfg.epsilon, &budget, solver.as_ref(), options, &mut rng)?;
                let releasable = ReleasableTrial {
                    final_centers: outcome.solution.centers.clone(),
                    noisy_cost: outcome.log.releasable.noisy_cost,
                    noisy_weights: outcome.log.releasable.clamped_weights.clone(),
                    run_log: outcome.log.releasable.clone(),
                };
                let evaluation = EvaluationTrial {
                    true_cost: outcome.solution.cost,
                    opt: opt.clone(),
                    profile: outcome.log.evaluation.profile.clone(),
                    budget: outcome.log.releasable.budget.clone(),
                };
                Ok(TrialReport { trial, releasable, evaluation })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let noisy: Vec<f64> = trials.iter().map(|t| t.releasable.noisy_cost).collect();
    let true_costs: Vec<f64> = trials.iter().map(|t| t.evaluation.true_cost).collect();
    let aggregate = AggregateStats {
        releasable: ReleasableAggregate { noisy_cost: CostSummary::from_values(&noisy) },
        evaluation: EvaluationAggregate { true_cost: CostSummary::from_values(&true_costs) },
    };

    Ok(ReportDocument { config: cfg.clone(), trials, aggregate })
}

/// Renders any serializable document as pretty JSON with a trailing
/// newline, the byte-stable form every command emits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut json = serde_json::to_string_pretty(value)?;
    json.push('\n');
    Ok(json)
}

#[allow(dead_code)]
fn _formats_are_referenced(_: InputFormat) {}
