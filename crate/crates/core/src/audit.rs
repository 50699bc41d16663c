//! Empirical (epsilon, delta) falsification on neighboring demand sets.
//!
//! The auditor runs a mechanism many times on both halves of a neighbor
//! pair, estimates per-outcome frequencies with 99% confidence intervals,
//! and checks every singleton event plus the greedy worst-case event in
//! both directions against `Pr[S on A] <= e^eps Pr[S on B] + delta`.
//!
//! A PASS means no violation was detected at this confidence; it is not a
//! certification. The proofs are the guarantee — the audit catches
//! implementation bugs such as a wrong sensitivity or a wrong budget split.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::clustering::build_thresholds;
use crate::error::{Error, Result};
use crate::max_coverage::{private_max_coverage, CoverageInstance};
use crate::mechanisms::{noisy_count, PrivacyBudget, RandomSource};
use crate::metric::{DiameterMode, MetricInstance};

/// Discrete outcome of one mechanism invocation.
pub type Outcome = u64;

/// z-quantile for two-sided 99% Wilson intervals.
const Z_99: f64 = 2.5758293035489004;

/// Minimum samples required per distinct observed outcome.
const SAMPLES_PER_OUTCOME: usize = 1000;

/// A pair of inputs whose demand multisets differ by exactly one element.
#[derive(Debug, Clone)]
pub struct NeighborPair<T> {
    pub base: T,
    pub variant: T,
}

impl<T: Clone> NeighborPair<T> {
    pub fn swapped(&self) -> NeighborPair<T> {
        NeighborPair { base: self.variant.clone(), variant: self.base.clone() }
    }
}

/// Builds a neighbor pair from an instance by dropping one demand slot.
pub fn drop_demand_slot(inst: &MetricInstance, slot: usize) -> Result<NeighborPair<MetricInstance>> {
    if slot >= inst.demand().len() {
        return Err(Error::IndexOutOfRange { index: slot, n: inst.demand().len() });
    }
    let mut demand = inst.demand().to_vec();
    demand.remove(slot);
    Ok(NeighborPair { base: inst.clone(), variant: inst.with_demand(demand)? })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub frequency: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for a binomial proportion.
fn wilson(successes: u64, samples: usize) -> ConfidenceInterval {
    let n = samples as f64;
    let p = successes as f64 / n;
    let z2 = Z_99 * Z_99;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z_99 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ConfidenceInterval {
        frequency: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeStats {
    pub outcome: Outcome,
    pub base: ConfidenceInterval,
    pub variant: ConfidenceInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    BaseVsVariant,
    VariantVsBase,
}

/// One tested event `S` with its directed DP inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventCheck {
    pub direction: Direction,
    pub event: Vec<Outcome>,
    /// Lower confidence bound on the numerator probability.
    pub lhs_lower: f64,
    /// `e^eps * (upper confidence bound on the denominator) + delta`.
    pub rhs_upper: f64,
    pub empirical_ratio: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub samples: usize,
    pub claimed_epsilon: f64,
    pub claimed_delta: f64,
    pub outcome_space: String,
    pub outcomes: Vec<OutcomeStats>,
    pub checks: Vec<EventCheck>,
    /// Largest directed singleton frequency ratio observed.
    pub worst_singleton_ratio: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else if b == 0.0 {
        f64::INFINITY
    } else {
        a / b
    }
}

fn directed_checks(
    direction: Direction,
    counts: &[(Outcome, u64, u64)],
    samples: usize,
    eps: f64,
    delta: f64,
) -> Vec<EventCheck> {
    let factor = eps.exp();
    let oriented = |a: u64, b: u64| match direction {
        Direction::BaseVsVariant => (a, b),
        Direction::VariantVsBase => (b, a),
    };
    let mut checks = Vec::new();

    // every singleton event
    for &(outcome, a, b) in counts {
        let (lc, rc) = oriented(a, b);
        let lhs = wilson(lc, samples);
        let rhs = wilson(rc, samples);
        let violated = lhs.lower > factor * rhs.upper + delta;
        checks.push(EventCheck {
            direction,
            event: vec![outcome],
            lhs_lower: lhs.lower,
            rhs_upper: factor * rhs.upper + delta,
            empirical_ratio: ratio(lhs.frequency, rhs.frequency),
            violated,
        });
    }

    // greedy worst-case event: all outcomes whose empirical frequency ratio
    // already exceeds e^eps
    let mut event = Vec::new();
    let mut lhs_count = 0u64;
    let mut rhs_count = 0u64;
    for &(outcome, a, b) in counts {
        let (lc, rc) = oriented(a, b);
        if lc as f64 > factor * rc as f64 {
            event.push(outcome);
            lhs_count += lc;
            rhs_count += rc;
        }
    }
    if !event.is_empty() {
        let lhs = wilson(lhs_count, samples);
        let rhs = wilson(rhs_count, samples);
        let violated = lhs.lower > factor * rhs.upper + delta;
        checks.push(EventCheck {
            direction,
            event,
            lhs_lower: lhs.lower,
            rhs_upper: factor * rhs.upper + delta,
            empirical_ratio: ratio(lhs.frequency, rhs.frequency),
            violated,
        });
    }
    checks
}

/// Runs `mechanism` `samples` times on each half of the pair (independent
/// substreams per run) and tests the claimed budget. Refuses outcome
/// spaces too large for the sample size; project the outcome first.
pub fn audit<T>(
    mechanism: impl Fn(&T, &mut RandomSource) -> Result<Outcome>,
    pair: &NeighborPair<T>,
    samples: usize,
    claimed: &PrivacyBudget,
    outcome_space: &str,
    rng: &RandomSource,
) -> Result<AuditReport> {
    if samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    let mut counts: BTreeMap<Outcome, (u64, u64)> = BTreeMap::new();
    for i in 0..samples {
        let mut base_rng = rng.substream(2 * i as u64);
        let mut variant_rng = rng.substream(2 * i as u64 + 1);
        let a = mechanism(&pair.base, &mut base_rng)?;
        let b = mechanism(&pair.variant, &mut variant_rng)?;
        counts.entry(a).or_insert((0, 0)).0 += 1;
        counts.entry(b).or_insert((0, 0)).1 += 1;
    }

    if samples < SAMPLES_PER_OUTCOME * counts.len() {
        return Err(Error::AuditRefused(format!(
            "{} distinct outcomes need at least {} samples (got {samples}); \
             project the outcome space down first",
            counts.len(),
            SAMPLES_PER_OUTCOME * counts.len(),
        )));
    }

    let flat: Vec<(Outcome, u64, u64)> =
        counts.iter().map(|(&o, &(a, b))| (o, a, b)).collect();
    let stats: Vec<OutcomeStats> = flat
        .iter()
        .map(|&(outcome, a, b)| OutcomeStats {
            outcome,
            base: wilson(a, samples),
            variant: wilson(b, samples),
        })
        .collect();

    let mut checks = directed_checks(
        Direction::BaseVsVariant,
        &flat,
        samples,
        claimed.epsilon(),
        claimed.delta(),
    );
    checks.extend(directed_checks(
        Direction::VariantVsBase,
        &flat,
        samples,
        claimed.epsilon(),
        claimed.delta(),
    ));

    let worst_singleton_ratio = stats
        .iter()
        .flat_map(|s| {
            [
                ratio(s.base.frequency, s.variant.frequency),
                ratio(s.variant.frequency, s.base.frequency),
            ]
        })
        .fold(0.0f64, f64::max);

    let verdict = if checks.iter().any(|c| c.violated) { Verdict::Fail } else { Verdict::Pass };

    Ok(AuditReport {
        samples,
        claimed_epsilon: claimed.epsilon(),
        claimed_delta: claimed.delta(),
        outcome_space: outcome_space.to_string(),
        outcomes: stats,
        checks,
        worst_singleton_ratio,
        verdict,
        note: "PASS means no violation detected at this confidence; it is not a certification"
            .to_string(),
    })
}

/// Projection: the id of the first set picked by the private coverage loop.
pub fn first_pick_outcome(
    inst: &CoverageInstance,
    target: &[usize],
    eps_s: f64,
    delta_s: f64,
    rng: &mut RandomSource,
) -> Result<Outcome> {
    let sel = private_max_coverage(inst, target, eps_s, delta_s, 1, rng)?;
    Ok(sel.chosen[0] as Outcome)
}

/// Projection: whether a noisy count clears a threshold. With the threshold
/// at zero this is the sign of the noisy weight.
pub fn noisy_count_bucket(
    count: f64,
    sensitivity: f64,
    eps: f64,
    threshold: f64,
    rng: &mut RandomSource,
) -> Result<Outcome> {
    let x = noisy_count(count, sensitivity, eps, rng)?;
    Ok(u64::from(x >= threshold))
}

/// Projection: the sorted multiset of centers chosen in the first coverage
/// round of the clustering pipeline, packed into a single outcome id.
/// Refuses instances whose encoding would overflow.
pub fn first_round_center_multiset(
    inst: &MetricInstance,
    epsilon: f64,
    budget: &PrivacyBudget,
    rng: &mut RandomSource,
) -> Result<Outcome> {
    let n = inst.n_points();
    let diameter = inst.diameter(DiameterMode::Exact);
    let schedule = build_thresholds(diameter, n, epsilon)?;
    let threshold = schedule.radii[0];
    let slots: Vec<usize> = (0..inst.demand().len()).collect();
    let family: Vec<Vec<usize>> = (0..n)
        .map(|v| inst.ball(v, threshold, &slots))
        .collect::<Result<_>>()?;
    let coverage = CoverageInstance::new(slots.clone(), family)?;
    let m = ((2.0 * inst.k() as f64 * (1.0 / epsilon).ln()).ceil() as usize)
        .max(1)
        .min(n);
    let sel = private_max_coverage(&coverage, &slots, budget.epsilon() / 2.0, budget.delta(), m, rng)?;
    let mut ids = sel.chosen;
    ids.sort_unstable();
    let mut packed: u64 = 0;
    for id in ids {
        packed = packed
            .checked_mul(n as u64 + 1)
            .and_then(|p| p.checked_add(id as u64 + 1))
            .ok_or_else(|| {
                Error::AuditRefused(
                    "first-round multiset does not fit one outcome id; audit a smaller instance"
                        .to_string(),
                )
            })?;
    }
    Ok(packed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_budget(eps: f64, delta: f64) -> PrivacyBudget {
        PrivacyBudget::new(eps, delta).unwrap()
    }

    #[test]
    fn constant_mechanism_passes_any_epsilon() {
        let pair = NeighborPair { base: 0u8, variant: 1u8 };
        let report = audit(
            |_, _| Ok(7),
            &pair,
            5_000,
            &tiny_budget(0.01, 1e-9),
            "constant",
            &RandomSource::new(1),
        )
        .unwrap();
        assert!(report.passed());
        assert_eq!(report.worst_singleton_ratio, 1.0);
    }

    #[test]
    fn exact_count_release_fails() {
        // releasing |D| with no noise: disjoint supports on neighbors
        let pair = NeighborPair { base: 10u64, variant: 11u64 };
        let report = audit(
            |&count, _| Ok(count),
            &pair,
            5_000,
            &tiny_budget(5.0, 1e-6),
            "exact demand count",
            &RandomSource::new(2),
        )
        .unwrap();
        assert!(!report.passed());
        assert!(report.worst_singleton_ratio.is_infinite());
    }

    #[test]
    fn bucketed_noisy_count_matches_laplace_cdf_oracle() {
        // neighbor counts n and n+1, bucket at n + 0.5, eps = 0.5 so the
        // Laplace scale is b = 2; exact CDF gives the expected ratio
        let n = 20.0f64;
        let eps = 0.5f64;
        let b = 1.0 / eps;
        let p_base_hi = 0.5 * (-0.5 / b).exp(); // P(base + Lap(b) >= n + 0.5)
        let p_var_hi = 1.0 - 0.5 * (-0.5 / b).exp();
        let oracle_ratio = p_var_hi / p_base_hi;
        assert!(oracle_ratio <= eps.exp());
        assert!(oracle_ratio >= 0.3f64.exp());

        let pair = NeighborPair { base: n, variant: n + 1.0 };
        let report = audit(
            |&count, rng| noisy_count_bucket(count, 1.0, eps, n + 0.5, rng),
            &pair,
            200_000,
            &tiny_budget(eps, 1e-9),
            "noisy count >= n + 0.5",
            &RandomSource::new(3),
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.worst_singleton_ratio <= eps.exp() * 1.03);
        assert!(report.worst_singleton_ratio >= 0.3f64.exp());
        // empirical frequencies agree with the analytic CDF
        let hi = report.outcomes.iter().find(|s| s.outcome == 1).unwrap();
        assert!((hi.base.frequency - p_base_hi).abs() < 0.005);
        assert!((hi.variant.frequency - p_var_hi).abs() < 0.005);
    }

    #[test]
    fn misbudgeted_noise_is_flagged() {
        // the budget split says Lap(2/eps_p) (i.e. eps_p / 2 per count); the
        // planted bug uses Lap(1/eps_p), doubling the effective epsilon
        let eps_p = 2.0;
        let claim = eps_p / 2.0;
        let n = 20.0;
        let pair = NeighborPair { base: n, variant: n + 1.0 };
        let report = audit(
            |&count, rng| noisy_count_bucket(count, 1.0, eps_p, n + 0.5, rng),
            &pair,
            200_000,
            &tiny_budget(claim, 1e-9),
            "noisy count >= n + 0.5 (planted bug)",
            &RandomSource::new(4),
        )
        .unwrap();
        assert!(!report.passed(), "audit must flag the doubled effective epsilon");
    }

    #[test]
    fn first_pick_ratios_bounded_by_score_sensitivity() {
        // neighbor differs in one covered element; per-outcome ratios stay
        // within e^{eps'} (score sensitivity 1) plus sampling slack
        let eps_s = 2.0;
        let delta_s = 1.0;
        let eps_prime = crate::max_coverage::eps_prime(eps_s, delta_s);
        let base = CoverageInstance::new(
            vec![0, 1, 2, 3],
            vec![vec![0, 1], vec![2], vec![3], vec![0, 1, 2]],
        )
        .unwrap();
        let pair = NeighborPair {
            base: (base.clone(), vec![0usize, 1, 2, 3]),
            variant: (base, vec![1usize, 2, 3]),
        };
        let report = audit(
            |(inst, target), rng| first_pick_outcome(inst, target, eps_s, delta_s, rng),
            &pair,
            100_000,
            &tiny_budget(eps_prime, 1e-9),
            "first pick",
            &RandomSource::new(5),
        )
        .unwrap();
        assert!(report.passed());
        assert!(report.worst_singleton_ratio <= eps_prime.exp() * 1.05);
    }

    #[test]
    fn audit_is_symmetric_under_swap() {
        let pair = NeighborPair { base: 5.0f64, variant: 6.0f64 };
        let rng = RandomSource::new(6);
        let run = |p: &NeighborPair<f64>| {
            audit(
                |&c, rng| noisy_count_bucket(c, 1.0, 1.0, 5.5, rng),
                p,
                50_000,
                &tiny_budget(1.0, 1e-9),
                "bucket",
                &rng,
            )
            .unwrap()
        };
        let fwd = run(&pair);
        let rev = run(&pair.swapped());
        assert_eq!(fwd.verdict, rev.verdict);

        // within one report the two directions are exact mirror images
        for check in &fwd.checks {
            if check.event.len() != 1 {
                continue;
            }
            let twin = fwd
                .checks
                .iter()
                .find(|c| c.event == check.event && c.direction != check.direction)
                .unwrap();
            let product = check.empirical_ratio * twin.empirical_ratio;
            assert!((product - 1.0).abs() < 1e-12, "directed ratios must be reciprocal");
        }

        // re-auditing the swapped pair reproduces the ratios up to
        // sampling noise
        let f = fwd
            .checks
            .iter()
            .find(|c| c.direction == Direction::BaseVsVariant && c.event == vec![1])
            .unwrap();
        let r = rev
            .checks
            .iter()
            .find(|c| c.direction == Direction::VariantVsBase && c.event == vec![1])
            .unwrap();
        assert!((f.empirical_ratio - r.empirical_ratio).abs() < 0.05);
    }

    #[test]
    fn intervals_shrink_with_sample_size() {
        let pair = NeighborPair { base: 5.0f64, variant: 6.0f64 };
        let width = |samples: usize| -> f64 {
            let report = audit(
                |&c, rng| noisy_count_bucket(c, 1.0, 1.0, 5.5, rng),
                &pair,
                samples,
                &tiny_budget(1.0, 1e-9),
                "bucket",
                &RandomSource::new(7),
            )
            .unwrap();
            let s = &report.outcomes[0];
            s.base.upper - s.base.lower
        };
        let w1 = width(10_000);
        let w4 = width(40_000);
        assert!(w4 <= 0.7 * w1, "quadrupling samples should roughly halve the interval");
    }

    #[test]
    fn refuses_oversized_outcome_space() {
        let pair = NeighborPair { base: 0u64, variant: 1u64 };
        let report = audit(
            |_, rng| Ok(rng.uniform_range(1_000_000) as u64),
            &pair,
            3_000,
            &tiny_budget(1.0, 1e-9),
            "unprojected",
            &RandomSource::new(8),
        );
        assert!(matches!(report, Err(Error::AuditRefused(_))));
    }

    #[test]
    fn first_round_multiset_projection_is_compact() {
        let inst = MetricInstance::euclidean(
            vec![vec![0.0], vec![0.1], vec![5.0], vec![5.1]],
            vec![0, 1, 2, 3],
            1,
            1.0,
        )
        .unwrap();
        let budget = tiny_budget(4.0, 0.5);
        let mut rng = RandomSource::new(9);
        let a = first_round_center_multiset(&inst, 0.3, &budget, &mut rng).unwrap();
        let mut rng2 = RandomSource::new(9);
        let b = first_round_center_multiset(&inst, 0.3, &budget, &mut rng2).unwrap();
        assert_eq!(a, b, "same seed, same packed outcome");
    }
}
