//! Experiment configuration: CLI flags, environment overrides, and the
//! config echo embedded in every report.
//!
//! Every flag can be overridden by a `DPCLUSTER_`-prefixed environment
//! variable. The seed is mandatory: there is no wall-clock seeding
//! anywhere, so a config determines its report byte for byte.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "dpcluster",
    about = "Differentially private k-medians / k-means clustering experiments",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one private clustering and report it in full.
    Cluster(ExperimentConfig),
    /// Run a seeded batch of trials with aggregate statistics.
    Bench(ExperimentConfig),
    /// Monte Carlo (epsilon, delta) falsification on a neighbor pair.
    Audit(AuditArgs),
    /// Produce a synthetic instance file from a generator spec.
    Generate(GenerateArgs),
    /// Ingest and validate an instance file.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// Coordinate CSV: header `id,x1..xd[,demand_mult]`.
    Csv,
    /// Distance-matrix JSON: fields `n`, `matrix` (row-major), `demand`.
    Matrix,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExperimentConfig {
    /// Instance file path, or a generator spec:
    /// planted(blobs,n,separation,noise_sd,dim) | uniform(n,dim) | line(n)
    #[arg(long, env = "DPCLUSTER_INPUT")]
    pub input: String,

    /// Input file format; inferred from the extension when omitted.
    #[arg(long, value_enum, env = "DPCLUSTER_FORMAT")]
    pub format: Option<InputFormat>,

    /// Number of centers to select.
    #[arg(long, env = "DPCLUSTER_K")]
    pub k: usize,

    /// Objective power p (1 = k-medians, 2 = k-means).
    #[arg(long, env = "DPCLUSTER_POWER", default_value_t = 1.0)]
    pub power: f64,

    /// Utility parameter of the threshold sweep, in (0, 0.6).
    #[arg(long, env = "DPCLUSTER_EPSILON", default_value_t = 0.1)]
    pub epsilon: f64,

    /// Privacy budget epsilon_p.
    #[arg(long = "epsilon-p", env = "DPCLUSTER_EPSILON_P")]
    pub epsilon_p: f64,

    /// Privacy budget delta_p, in (0, 1).
    #[arg(long = "delta-p", env = "DPCLUSTER_DELTA_P")]
    pub delta_p: f64,

    /// Black-box solver: brute_force | local_search | lloyd.
    #[arg(long, env = "DPCLUSTER_SOLVER", default_value = "brute_force")]
    pub solver: String,

    /// Restarts for the lloyd solver.
    #[arg(long, env = "DPCLUSTER_RESTARTS", default_value_t = 8)]
    pub restarts: usize,

    /// Iteration cap for local_search and lloyd.
    #[arg(long = "max-iters", env = "DPCLUSTER_MAX_ITERS", default_value_t = 100)]
    pub max_iters: usize,

    /// Root seed; all randomness derives from it.
    #[arg(long, env = "DPCLUSTER_SEED")]
    pub seed: u64,

    /// Number of seeded trials.
    #[arg(long, env = "DPCLUSTER_TRIALS", default_value_t = 1)]
    pub trials: usize,

    /// Concurrent trial workers.
    #[arg(long, env = "DPCLUSTER_JOBS", default_value_t = 1)]
    pub jobs: usize,

    /// Report output path; stdout when omitted.
    #[arg(long, env = "DPCLUSTER_OUT")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,

    /// Use the farthest-point-sweep diameter instead of the exact scan
    /// (flagged in the report).
    #[arg(long = "approx-diameter", env = "DPCLUSTER_APPROX_DIAMETER", default_value_t = false)]
    pub approx_diameter: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Id of the first center pick of the coverage loop.
    FirstPick,
    /// Whether one center's noisy weight clears a threshold.
    WeightBucket,
    /// Sorted multiset of first-round center picks.
    FirstRound,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub config: ExperimentConfig,

    /// Outcome projection to audit.
    #[arg(long, value_enum, default_value_t = Projection::FirstPick)]
    pub projection: Projection,

    /// Mechanism runs per side of the neighbor pair.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,

    /// Demand slot removed to form the neighbor; defaults to the last.
    #[arg(long = "drop-slot")]
    pub drop_slot: Option<usize>,

    /// Bucket threshold for the weight-bucket projection; 0 tests the sign.
    #[arg(long = "bucket-threshold", default_value_t = 0.0)]
    pub bucket_threshold: f64,

    /// Override the claimed epsilon (defaults to the projection's budget).
    #[arg(long = "claimed-epsilon")]
    pub claimed_epsilon: Option<f64>,

    /// Override the claimed delta.
    #[arg(long = "claimed-delta")]
    pub claimed_delta: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Generator spec: planted(blobs,n,separation,noise_sd,dim) |
    /// uniform(n,dim) | line(n)
    #[arg(long)]
    pub spec: String,

    /// Root seed for the generator.
    #[arg(long, env = "DPCLUSTER_SEED")]
    pub seed: u64,

    /// Output instance file (coordinate CSV).
    #[arg(long, env = "DPCLUSTER_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Instance file to check.
    #[arg(long)]
    pub input: PathBuf,

    /// Input file format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
}
