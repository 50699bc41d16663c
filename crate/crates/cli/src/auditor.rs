//! Wiring between the CLI and the privacy auditor: neighbor-pair
//! construction and the default outcome projections.

use dpcluster_core::audit::{
    audit, drop_demand_slot, first_pick_outcome, first_round_center_multiset, noisy_count_bucket,
    AuditReport,
};
use dpcluster_core::clustering::build_thresholds;
use dpcluster_core::max_coverage::{eps_prime, CoverageInstance};
use dpcluster_core::{DiameterMode, MetricInstance, PrivacyBudget, RandomSource};

use crate::config::{AuditArgs, Projection};
use crate::report::build_instance;
use crate::{HarnessError, Result};

/// Claimed delta when the projected mechanism is pure-epsilon (the report
/// criterion needs a budget object, and zero delta is rejected there).
const NEAR_ZERO_DELTA: f64 = 1e-9;

pub fn run_audit(args: &AuditArgs) -> Result<AuditReport> {
    let cfg = &args.config;
    let inst = build_instance(cfg)?;
    if inst.demand().is_empty() {
        return Err(HarnessError::Config("audit needs a nonempty demand multiset".to_string()));
    }
    let slot = args.drop_slot.unwrap_or(inst.demand().len() - 1);
    let pair = drop_demand_slot(&inst, slot).map_err(HarnessError::Core)?;
    let budget = PrivacyBudget::new(cfg.epsilon_p, cfg.delta_p).map_err(HarnessError::Core)?;
    let root = RandomSource::new(cfg.seed);

    let eps_s = cfg.epsilon_p / 2.0;
    let claim = |default_eps: f64, default_delta: f64| -> Result<PrivacyBudget> {
        PrivacyBudget::new(
            args.claimed_epsilon.unwrap_or(default_eps),
            args.claimed_delta.unwrap_or(default_delta),
        )
        .map_err(HarnessError::Core)
    };

    let report = match args.projection {
        Projection::FirstPick => {
            let claimed = claim(eps_prime(eps_s, cfg.delta_p), NEAR_ZERO_DELTA)?;
            let epsilon = cfg.epsilon;
            audit(
                |inst: &MetricInstance, rng: &mut RandomSource| {
                    let slots: Vec<usize> = (0..inst.demand().len()).collect();
                    let schedule = build_thresholds(
                        inst.diameter(DiameterMode::Exact),
                        inst.n_points(),
                        epsilon,
                    )?;
                    let t1 = schedule.radii[0];
                    let family = (0..inst.n_points())
                        .map(|v| inst.ball(v, t1, &slots))
                        .collect::<dpcluster_core::Result<Vec<_>>>()?;
                    let coverage = CoverageInstance::new(slots.clone(), family)?;
                    first_pick_outcome(&coverage, &slots, eps_s, cfg.delta_p, rng)
                },
                &pair,
                args.samples,
                &claimed,
                "first coverage pick (center id)",
                &root,
            )
        }
        Projection::WeightBucket => {
            let claimed = claim(eps_s, NEAR_ZERO_DELTA)?;
            let threshold = args.bucket_threshold;
            audit(
                |inst: &MetricInstance, rng: &mut RandomSource| {
                    noisy_count_bucket(inst.demand().len() as f64, 1.0, eps_s, threshold, rng)
                },
                &pair,
                args.samples,
                &claimed,
                "noisy demand count bucket",
                &root,
            )
        }
        Projection::FirstRound => {
            let claimed = claim(eps_s, cfg.delta_p)?;
            let epsilon = cfg.epsilon;
            audit(
                |inst: &MetricInstance, rng: &mut RandomSource| {
                    first_round_center_multiset(inst, epsilon, &budget, rng)
                },
                &pair,
                args.samples,
                &claimed,
                "first-round center multiset (packed)",
                &root,
            )
        }
    };
    report.map_err(HarnessError::Core)
}
