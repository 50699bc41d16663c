//! Differentially private metric clustering.
//!
//! The pipeline privately selects candidate centers by sweeping geometric
//! distance thresholds with an exponential-mechanism maximum-coverage pass
//! per threshold, snaps the private demand onto the selected candidates,
//! perturbs the per-candidate counts with Laplace noise, and hands the
//! resulting weighted instance to a pluggable non-private clustering
//! solver. `p = 1` gives k-medians; `p = 2` over a Euclidean candidate set
//! gives k-means.
//!
//! Modules:
//! - [`metric`]: point sets, distance oracles, powered costs, balls.
//! - [`mechanisms`]: Laplace and exponential mechanisms over seeded streams.
//! - [`max_coverage`]: the private coverage pass and its greedy reference.
//! - [`clustering`]: the end-to-end pipeline with its run log.
//! - [`solvers`]: brute force, local search, and weighted Lloyd black boxes.
//! - [`audit`]: empirical (epsilon, delta) falsification on neighbor pairs.

pub mod audit;
pub mod clustering;
pub mod error;
pub mod max_coverage;
pub mod mechanisms;
pub mod metric;
pub mod solvers;

pub use error::{Error, Result};
pub use mechanisms::{PrivacyBudget, RandomSource};
pub use metric::{ClusteringSolution, DiameterMode, Geometry, MetricInstance};
