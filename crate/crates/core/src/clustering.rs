//! The threshold-sweep DP clustering pipeline: a geometric schedule of
//! radii, one private maximum-coverage pass per radius to pick candidate
//! centers, demand snapping, Laplace-perturbed counts, and a final
//! non-private black-box solve on the noisy weighted instance.
//!
//! `p = 1` is the k-medians pipeline; `p = 2` with a k-means black box is
//! the Euclidean k-means pipeline over a candidate facility set.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::max_coverage::{eps_prime, private_max_coverage, CoverageInstance};
use crate::mechanisms::{noisy_count, PrivacyBudget, RandomSource};
use crate::metric::{apply_power, ClusteringSolution, DiameterMode, MetricInstance};
use crate::solvers::{BlackBoxSolver, SolverDescriptor, WeightedInstance};

/// The utility parameter must keep `1 - eps - eps^2` bounded away from zero
/// for the coverage-to-cost argument to hold.
const MAX_UTILITY_EPSILON: f64 = 0.6;

/// Geometric radii `t_1 .. t_r` with `t_1 = diameter/n` and ratio
/// `1 + epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSchedule {
    pub epsilon: f64,
    pub radii: Vec<f64>,
}

impl ThresholdSchedule {
    pub fn rounds(&self) -> usize {
        self.radii.len()
    }
}

/// `r = ceil(1 + log_{1+eps} n)` radii starting at `diameter/n`; the last
/// radius always reaches the diameter. A zero diameter yields the
/// degenerate single radius 0.
pub fn build_thresholds(diameter: f64, n: usize, epsilon: f64) -> Result<ThresholdSchedule> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(diameter.is_finite() && diameter >= 0.0) {
        return Err(Error::invalid(format!("diameter must be nonnegative, got {diameter}")));
    }
    if diameter == 0.0 {
        return Ok(ThresholdSchedule { epsilon, radii: vec![0.0] });
    }
    let ratio = 1.0 + epsilon;
    let rounds = (1.0 + (n as f64).ln() / ratio.ln()).ceil() as usize;
    let mut radii = Vec::with_capacity(rounds);
    let base = diameter / n as f64;
    for i in 0..rounds {
        radii.push(base * ratio.powi(i as i32));
    }
    // guard against float undershoot of the t_r >= diameter invariant
    while *radii.last().unwrap() < diameter {
        radii.push(radii.last().unwrap() * ratio);
    }
    Ok(ThresholdSchedule { epsilon, radii })
}

/// Demand counts per distance band `[t_{i-1}, t_i)` from a reference center
/// set (`t_0 = 0`, last band closed above), with the discretized cost
/// `sum_i o_i * t_i^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdProfile {
    pub band_counts: Vec<u64>,
    /// Sum of powered distances from demand to the reference centers.
    pub snap_cost: f64,
    /// Powered thresholds weighted by band occupancy.
    pub discretized_cost: f64,
}

pub fn threshold_profile(
    inst: &MetricInstance,
    reference_centers: &[usize],
    schedule: &ThresholdSchedule,
) -> Result<ThresholdProfile> {
    if reference_centers.is_empty() {
        return Err(Error::invalid("reference centers must be nonempty"));
    }
    let p = inst.power();
    let mut band_counts = vec![0u64; schedule.radii.len()];
    let mut snap_cost = 0.0;
    let mut discretized_cost = 0.0;
    for &point in inst.demand() {
        let (_, d) = inst.nearest_center(point, reference_centers)?;
        let band = schedule
            .radii
            .iter()
            .position(|&t| d < t)
            .unwrap_or(schedule.radii.len() - 1);
        band_counts[band] += 1;
        snap_cost += apply_power(d, p);
        discretized_cost += apply_power(schedule.radii[band], p);
    }
    Ok(ThresholdProfile { band_counts, snap_cost, discretized_cost })
}

/// Snaps every demand point to its nearest center (un-powered distance,
/// lowest-index ties) and counts per center. Every center appears in the
/// result, possibly with count 0.
pub fn snap_and_count(inst: &MetricInstance, centers: &[usize]) -> Result<BTreeMap<usize, u64>> {
    if centers.is_empty() {
        return Err(Error::invalid("centers must be nonempty"));
    }
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    let mut sorted = centers.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for &c in &sorted {
        if c >= inst.n_points() {
            return Err(Error::IndexOutOfRange { index: c, n: inst.n_points() });
        }
        counts.insert(c, 0);
    }
    for &point in inst.demand() {
        let (c, _) = inst.nearest_center(point, &sorted)?;
        *counts.get_mut(&c).unwrap() += 1;
    }
    Ok(counts)
}

/// Snapped candidate centers with their Laplace-perturbed weights; the
/// input handed to the black-box solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyWeightedInstance {
    /// Unique snapped centers, ascending.
    pub centers: Vec<usize>,
    /// Raw noisy weights, aligned with `centers`; may be negative.
    pub weights: Vec<f64>,
    /// `max(0, weight)`, what the solver actually sees.
    pub clamped_weights: Vec<f64>,
    pub k: usize,
    pub power: f64,
}

impl NoisyWeightedInstance {
    /// The weighted solver problem over the full facility set `V`.
    pub fn to_weighted<'a>(&self, inst: &'a MetricInstance) -> Result<WeightedInstance<'a>> {
        let demand: Vec<(usize, f64)> = self
            .centers
            .iter()
            .zip(&self.clamped_weights)
            .map(|(&c, &w)| (c, w))
            .collect();
        WeightedInstance::new(
            inst.geometry(),
            (0..inst.n_points()).collect(),
            demand,
            self.k,
            self.power,
        )
    }
}

/// Budget consumption, split between the coverage loop and the Laplace
/// line exactly as the sequential composition requires.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetLedger {
    pub loop_epsilon: f64,
    pub loop_delta: f64,
    pub laplace_epsilon: f64,
    pub laplace_delta: f64,
    pub total_epsilon: f64,
    pub total_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CenterWeight {
    pub center: usize,
    pub weight: f64,
}

/// One coverage round as safe to release: the threshold and the chosen
/// center ids only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleasableRound {
    pub threshold: f64,
    pub chosen: Vec<usize>,
}

/// Demand-derived per-round diagnostics; never released.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationRound {
    pub residual_before: Vec<usize>,
    pub covered_count: usize,
    pub marginal_trace: Vec<usize>,
}

/// Everything in this sub-document is a differentially private output or a
/// function of public data, and may be released.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReleasableLog {
    pub schedule: ThresholdSchedule,
    pub diameter: f64,
    pub diameter_mode: DiameterMode,
    pub eps_prime: f64,
    pub picks_per_round: usize,
    pub rounds: Vec<ReleasableRound>,
    pub centers: Vec<usize>,
    pub raw_weights: Vec<CenterWeight>,
    pub clamped_weights: Vec<CenterWeight>,
    pub budget: BudgetLedger,
    pub solver: SolverDescriptor,
    pub final_centers: Vec<usize>,
    /// Solver objective on the noisy weighted instance.
    pub noisy_cost: f64,
}

/// Quantities computed from the raw demand for evaluation only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationLog {
    pub rounds: Vec<EvaluationRound>,
    pub snap_counts: Vec<(usize, u64)>,
    pub true_cost: f64,
    /// Band profile of the demand against the snapped centers.
    pub profile: ThresholdProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLog {
    pub releasable: ReleasableLog,
    pub evaluation: EvaluationLog,
}

#[derive(Debug, Clone)]
pub struct DpClusterOutcome {
    /// Final centers with the cost recomputed on the true demand
    /// (evaluation only; the releasable cost is `log.releasable.noisy_cost`).
    pub solution: ClusteringSolution,
    pub noisy_instance: NoisyWeightedInstance,
    pub log: RunLog,
}

#[derive(Debug, Clone, Copy)]
pub struct DpClusterOptions {
    pub diameter_mode: DiameterMode,
}

impl Default for DpClusterOptions {
    fn default() -> Self {
        DpClusterOptions { diameter_mode: DiameterMode::Exact }
    }
}

// substream indices reserved inside one dp_cluster run
const STREAM_LAPLACE: u64 = 1;
const STREAM_SOLVER: u64 = 2;
const STREAM_ROUND_BASE: u64 = 100;

/// End-to-end private clustering with the default options.
pub fn dp_cluster(
    inst: &MetricInstance,
    epsilon: f64,
    budget: &PrivacyBudget,
    solver: &dyn BlackBoxSolver,
    rng: &mut RandomSource,
) -> Result<DpClusterOutcome> {
    dp_cluster_with(inst, epsilon, budget, solver, DpClusterOptions::default(), rng)
}

pub fn dp_cluster_with(
    inst: &MetricInstance,
    epsilon: f64,
    budget: &PrivacyBudget,
    solver: &dyn BlackBoxSolver,
    options: DpClusterOptions,
    rng: &mut RandomSource,
) -> Result<DpClusterOutcome> {
    if !(epsilon > 0.0 && epsilon < MAX_UTILITY_EPSILON) {
        return Err(Error::invalid(format!(
            "utility epsilon must lie in (0, {MAX_UTILITY_EPSILON}), got {epsilon}"
        )));
    }
    if budget.delta() >= 1.0 {
        return Err(Error::invalid("delta_p must lie in (0, 1) for clustering"));
    }
    let descriptor = solver.descriptor();
    if !descriptor.power.supports(inst.power()) {
        return Err(Error::invalid(format!(
            "solver `{}` does not support objective power p = {}",
            descriptor.name,
            inst.power()
        )));
    }

    let n = inst.n_points();
    let k = inst.k();
    let diameter = inst.diameter(options.diameter_mode);
    let schedule = build_thresholds(diameter, n, epsilon)?;
    let eps_s = budget.epsilon() / 2.0;
    let eps_p = eps_prime(eps_s, budget.delta());
    let picks = (2.0 * k as f64 * (1.0 / epsilon).ln()).ceil() as usize;
    let picks = picks.max(1);

    let mut residual: Vec<usize> = (0..inst.demand().len()).collect();
    let mut pick_sequence: Vec<usize> = Vec::new();
    let mut releasable_rounds = Vec::new();
    let mut evaluation_rounds = Vec::new();
    let mut loop_epsilon_spent = 0.0;

    if diameter > 0.0 {
        for (round, &threshold) in schedule.radii.iter().enumerate() {
            let family: Vec<Vec<usize>> = (0..n)
                .map(|v| inst.ball(v, threshold, &residual))
                .collect::<Result<_>>()?;
            let coverage = CoverageInstance::new(residual.clone(), family)?;
            // the family always has n sets, one per candidate center
            let m_eff = picks.min(n);
            let mut round_rng = rng.substream(STREAM_ROUND_BASE + round as u64);
            let selection = private_max_coverage(
                &coverage,
                &residual,
                eps_s,
                budget.delta(),
                m_eff,
                &mut round_rng,
            )?;

            evaluation_rounds.push(EvaluationRound {
                residual_before: residual.clone(),
                covered_count: selection.covered.len(),
                marginal_trace: selection.marginal_trace.clone(),
            });
            releasable_rounds.push(ReleasableRound { threshold, chosen: selection.chosen.clone() });
            pick_sequence.extend(selection.chosen.iter().copied());
            residual.retain(|slot| selection.covered.binary_search(slot).is_err());
        }
        loop_epsilon_spent = eps_s;
    } else {
        // degenerate all-coincident instance: the loop is skipped and only
        // the Laplace line consumes budget
        pick_sequence.push(0);
    }

    let mut centers: Vec<usize> = pick_sequence.clone();
    centers.sort_unstable();
    centers.dedup();

    let counts = snap_and_count(inst, &centers)?;
    let mut laplace_rng = rng.substream(STREAM_LAPLACE);
    let mut raw_weights = Vec::with_capacity(centers.len());
    let mut clamped_weights = Vec::with_capacity(centers.len());
    for &c in &centers {
        let noisy = noisy_count(counts[&c] as f64, 1.0, budget.epsilon() / 2.0, &mut laplace_rng)?;
        raw_weights.push(noisy);
        clamped_weights.push(noisy.max(0.0));
    }

    let noisy_instance = NoisyWeightedInstance {
        centers: centers.clone(),
        weights: raw_weights.clone(),
        clamped_weights: clamped_weights.clone(),
        k,
        power: inst.power(),
    };

    let weighted = noisy_instance.to_weighted(inst)?;
    let mut solver_rng = rng.substream(STREAM_SOLVER);
    let solved = solver.solve(&weighted, &mut solver_rng).map_err(|e| Error::SolverFailure {
        solver: descriptor.name.clone(),
        message: format!(
            "{e} (rounds = {}, |C| = {}, picks per round = {picks})",
            schedule.rounds(),
            centers.len()
        ),
    })?;

    let (true_cost, assignment) = inst.clustering_cost(&solved.centers)?;
    let profile = threshold_profile(inst, &centers, &schedule)?;

    let budget_ledger = BudgetLedger {
        loop_epsilon: loop_epsilon_spent,
        loop_delta: if diameter > 0.0 { budget.delta() } else { 0.0 },
        laplace_epsilon: budget.epsilon() / 2.0,
        laplace_delta: 0.0,
        total_epsilon: loop_epsilon_spent + budget.epsilon() / 2.0,
        total_delta: if diameter > 0.0 { budget.delta() } else { 0.0 },
    };

    let log = RunLog {
        releasable: ReleasableLog {
            schedule: schedule.clone(),
            diameter,
            diameter_mode: options.diameter_mode,
            eps_prime: eps_p,
            picks_per_round: picks,
            rounds: releasable_rounds,
            centers: centers.clone(),
            raw_weights: centers
                .iter()
                .zip(&raw_weights)
                .map(|(&center, &weight)| CenterWeight { center, weight })
                .collect(),
            clamped_weights: centers
                .iter()
                .zip(&clamped_weights)
                .map(|(&center, &weight)| CenterWeight { center, weight })
                .collect(),
            budget: budget_ledger,
            solver: descriptor,
            final_centers: solved.centers.clone(),
            noisy_cost: solved.cost,
        },
        evaluation: EvaluationLog {
            rounds: evaluation_rounds,
            snap_counts: counts.into_iter().collect(),
            true_cost,
            profile,
        },
    };

    Ok(DpClusterOutcome {
        solution: ClusteringSolution { centers: solved.centers, cost: true_cost, assignment },
        noisy_instance,
        log,
    })
}

/// The raw (noise-free) weighted problem of an instance: every demand slot
/// weighs 1, facilities are all of `V`. This is what the brute-force oracle
/// solves to obtain the true optimum.
pub fn raw_weighted_instance(inst: &MetricInstance) -> Result<WeightedInstance<'_>> {
    WeightedInstance::new(
        inst.geometry(),
        (0..inst.n_points()).collect(),
        inst.demand().iter().map(|&d| (d, 1.0)).collect(),
        inst.k(),
        inst.power(),
    )
}

/// How Euclidean candidate facilities are derived from raw coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CandidateMode {
    /// Facilities are exactly the input points.
    Identity,
    /// Facilities are the input points snapped to an axis-aligned grid of
    /// the given cell width, deduplicated.
    Grid { cell: f64 },
}

/// Builds the clustering instance for the Euclidean pipeline: the facility
/// set `V` from the chosen candidate mode, demand mapped onto it (with
/// multiplicity when grid cells merge points).
pub fn euclidean_candidate_provider(
    points: &[Vec<f64>],
    mode: CandidateMode,
    k: usize,
    power: f64,
) -> Result<MetricInstance> {
    match mode {
        CandidateMode::Identity => {
            let demand: Vec<usize> = (0..points.len()).collect();
            MetricInstance::euclidean(points.to_vec(), demand, k, power)
        }
        CandidateMode::Grid { cell } => {
            if !(cell.is_finite() && cell > 0.0) {
                return Err(Error::invalid(format!("grid cell width must be positive, got {cell}")));
            }
            let mut facilities: Vec<Vec<f64>> = Vec::new();
            let mut demand = Vec::with_capacity(points.len());
            for p in points {
                let snapped: Vec<f64> = p.iter().map(|x| (x / cell).round() * cell).collect();
                let idx = match facilities.iter().position(|f| f == &snapped) {
                    Some(i) => i,
                    None => {
                        facilities.push(snapped);
                        facilities.len() - 1
                    }
                };
                demand.push(idx);
            }
            MetricInstance::euclidean(facilities, demand, k, power)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::BruteForceSolver;

    fn line_instance(xs: &[f64], demand: Vec<usize>, k: usize, p: f64) -> MetricInstance {
        MetricInstance::euclidean(xs.iter().map(|&x| vec![x]).collect(), demand, k, p).unwrap()
    }

    /// Well-separated Gaussian-ish blobs for pipeline tests.
    fn planted_blobs(
        blobs: usize,
        per_blob: usize,
        separation: f64,
        spread: f64,
        rng: &mut RandomSource,
    ) -> Vec<Vec<f64>> {
        let mut coords = Vec::with_capacity(blobs * per_blob);
        for b in 0..blobs {
            let cx = b as f64 * separation;
            let cy = (b % 2) as f64 * separation;
            for _ in 0..per_blob {
                coords.push(vec![
                    cx + spread * (rng.uniform() - 0.5),
                    cy + spread * (rng.uniform() - 0.5),
                ]);
            }
        }
        coords
    }

    #[test]
    fn thresholds_doubling_example() {
        let s = build_thresholds(10.0, 10, 1.0).unwrap();
        assert_eq!(s.radii.len(), 5);
        let expect = [1.0, 2.0, 4.0, 8.0, 16.0];
        for (a, b) in s.radii.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn thresholds_degenerate_zero_diameter() {
        let s = build_thresholds(0.0, 7, 0.3).unwrap();
        assert_eq!(s.radii, vec![0.0]);
    }

    #[test]
    fn thresholds_half_epsilon_example() {
        let s = build_thresholds(1.0, 100, 0.5).unwrap();
        assert_eq!(s.radii.len(), 13);
        assert!((s.radii[0] - 0.01).abs() < 1e-15);
        let last = *s.radii.last().unwrap();
        assert!((last - 0.01 * 1.5f64.powi(12)).abs() < 1e-12);
        assert!(last >= 1.0);
    }

    #[test]
    fn thresholds_reject_bad_inputs() {
        assert!(build_thresholds(1.0, 0, 0.5).is_err());
        assert!(build_thresholds(1.0, 5, 0.0).is_err());
        assert!(build_thresholds(-1.0, 5, 0.5).is_err());
    }

    #[test]
    fn thresholds_last_radius_reaches_diameter() {
        for n in [2usize, 3, 8, 16, 100, 1000] {
            for eps in [0.1, 0.25, 0.5, 1.0] {
                let s = build_thresholds(3.7, n, eps).unwrap();
                assert!(*s.radii.last().unwrap() >= 3.7);
                for w in s.radii.windows(2) {
                    assert!((w[1] / w[0] - (1.0 + eps)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn snap_counts_examples() {
        // D = {a, a, b} with C = {a, b}
        let inst = line_instance(&[0.0, 5.0], vec![0, 0, 1], 1, 1.0);
        let counts = snap_and_count(&inst, &[0, 1]).unwrap();
        assert_eq!(counts[&0], 2);
        assert_eq!(counts[&1], 1);

        // single center takes everything
        let counts = snap_and_count(&inst, &[1]).unwrap();
        assert_eq!(counts[&1], 3);

        // equidistant demand goes to the lower-indexed center
        let inst = line_instance(
            &(0..=10).map(|i| i as f64).collect::<Vec<_>>(),
            vec![5],
            1,
            1.0,
        );
        let counts = snap_and_count(&inst, &[3, 7]).unwrap();
        assert_eq!(counts[&3], 1);
        assert_eq!(counts[&7], 0);
    }

    #[test]
    fn profile_all_demand_at_centers() {
        let inst = line_instance(&[0.0, 10.0], vec![0, 0, 1], 1, 1.0);
        let schedule = build_thresholds(10.0, 2, 1.0).unwrap();
        let profile = threshold_profile(&inst, &[0, 1], &schedule).unwrap();
        assert_eq!(profile.band_counts[0], 3);
        assert_eq!(profile.band_counts.iter().sum::<u64>(), 3);
        // distance 0 lands in the first band, contributing t_1 = diameter/n each
        assert!((profile.discretized_cost - 3.0 * 5.0).abs() < 1e-12);
        assert_eq!(profile.snap_cost, 0.0);
    }

    #[test]
    fn profile_discretization_bound_random_instances() {
        // discretized cost <= (1+eps)^p * cost + diameter^p
        let mut rng = RandomSource::new(515);
        for trial in 0..50 {
            let n = 8 + rng.uniform_range(25);
            let coords: Vec<Vec<f64>> =
                (0..n).map(|_| vec![rng.uniform() * 40.0, rng.uniform() * 40.0]).collect();
            for p in [1.0, 2.0] {
                for eps in [0.1, 0.5] {
                    let inst =
                        MetricInstance::euclidean(coords.clone(), (0..n).collect(), 2, p).unwrap();
                    let diameter = inst.diameter(DiameterMode::Exact);
                    let schedule = build_thresholds(diameter, n, eps).unwrap();
                    let centers = vec![0, n / 2];
                    let (cost, _) = inst.clustering_cost(&centers).unwrap();
                    let profile = threshold_profile(&inst, &centers, &schedule).unwrap();
                    assert_eq!(profile.band_counts.iter().sum::<u64>() as usize, n);
                    let bound = (1.0 + eps).powf(p) * cost + apply_power(diameter, p);
                    assert!(
                        profile.discretized_cost <= bound + 1e-9,
                        "trial {trial}, p = {p}, eps = {eps}: {} > {bound}",
                        profile.discretized_cost
                    );
                }
            }
        }
    }

    #[test]
    fn candidate_provider_identity_and_grid() {
        let points = vec![vec![0.2, 0.2], vec![0.4, 0.1]];
        let identity = euclidean_candidate_provider(&points, CandidateMode::Identity, 1, 2.0).unwrap();
        assert_eq!(identity.n_points(), 2);
        assert_eq!(identity.demand(), &[0, 1]);

        let grid =
            euclidean_candidate_provider(&points, CandidateMode::Grid { cell: 1.0 }, 1, 2.0).unwrap();
        assert_eq!(grid.n_points(), 1, "both points snap to the origin cell corner");
        assert_eq!(grid.geometry().coords().unwrap()[0], vec![0.0, 0.0]);
        assert_eq!(grid.demand(), &[0, 0]);

        assert!(euclidean_candidate_provider(&points, CandidateMode::Grid { cell: 0.0 }, 1, 2.0).is_err());
    }

    #[test]
    fn grid_snapping_within_half_diagonal() {
        let mut rng = RandomSource::new(77);
        let h = 0.7;
        let dim = 3usize;
        let bound = h * (dim as f64).sqrt() / 2.0;
        for _ in 0..200 {
            let p: Vec<f64> = (0..dim).map(|_| rng.uniform() * 10.0 - 5.0).collect();
            let snapped: Vec<f64> = p.iter().map(|x| (x / h).round() * h).collect();
            let d2: f64 = p.iter().zip(&snapped).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d2 <= bound * bound + 1e-12);
        }
    }

    #[test]
    fn dp_cluster_recovers_planted_instance_without_noise() {
        let mut gen = RandomSource::new(2061);
        let coords = planted_blobs(3, 10, 20.0, 1.0, &mut gen);
        let inst = MetricInstance::euclidean(coords, (0..30).collect(), 3, 1.0).unwrap();
        let budget = PrivacyBudget::new(1e6, 0.1).unwrap();
        let mut rng = RandomSource::new(5);
        let outcome =
            dp_cluster(&inst, 0.1, &budget, &BruteForceSolver, &mut rng).unwrap();

        let opt = BruteForceSolver
            .solve(&raw_weighted_instance(&inst).unwrap(), &mut RandomSource::new(0))
            .unwrap();
        assert!(
            outcome.solution.cost <= 2.0 * opt.cost + 1e-3,
            "pipeline cost {} vs optimum {}",
            outcome.solution.cost,
            opt.cost
        );
    }

    #[test]
    fn dp_cluster_k_equals_n_costs_nothing() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let inst = line_instance(&xs, (0..8).collect(), 8, 1.0);
        let diameter = inst.diameter(DiameterMode::Exact);
        let budget = PrivacyBudget::new(1e6, 0.1).unwrap();
        let eps = 0.2;
        let mut rng = RandomSource::new(9);
        let outcome = dp_cluster(&inst, eps, &budget, &BruteForceSolver, &mut rng).unwrap();
        assert!(outcome.solution.cost <= diameter * (1.0 + eps));
        assert_eq!(outcome.solution.cost, 0.0);
    }

    #[test]
    fn dp_cluster_is_deterministic_given_seed() {
        let mut gen = RandomSource::new(31337);
        let coords = planted_blobs(2, 8, 10.0, 1.0, &mut gen);
        let inst = MetricInstance::euclidean(coords, (0..16).collect(), 2, 1.0).unwrap();
        let budget = PrivacyBudget::new(2.0, 0.05).unwrap();
        let run = |seed: u64| {
            let mut rng = RandomSource::new(seed);
            dp_cluster(&inst, 0.2, &budget, &BruteForceSolver, &mut rng).unwrap()
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a.solution, b.solution);
        assert_eq!(a.noisy_instance, b.noisy_instance);
        assert_eq!(a.log, b.log);
        let c = run(43);
        assert!(c.noisy_instance.weights != a.noisy_instance.weights);
    }

    #[test]
    fn dp_cluster_zero_diameter_degenerate() {
        let inst = MetricInstance::euclidean(
            vec![vec![1.0, 1.0]; 5],
            vec![0, 1, 2, 3, 4],
            2,
            1.0,
        )
        .unwrap();
        let budget = PrivacyBudget::new(4.0, 0.1).unwrap();
        let mut rng = RandomSource::new(3);
        let outcome = dp_cluster(&inst, 0.3, &budget, &BruteForceSolver, &mut rng).unwrap();
        assert_eq!(outcome.solution.cost, 0.0);
        assert_eq!(outcome.log.releasable.budget.loop_epsilon, 0.0);
        assert_eq!(outcome.log.releasable.budget.laplace_epsilon, 2.0);
    }

    #[test]
    fn dp_cluster_validates_parameters() {
        let inst = line_instance(&[0.0, 1.0, 2.0], vec![0, 1, 2], 1, 1.0);
        let budget = PrivacyBudget::new(1.0, 0.1).unwrap();
        let mut rng = RandomSource::new(0);
        assert!(dp_cluster(&inst, 0.7, &budget, &BruteForceSolver, &mut rng).is_err());
        assert!(dp_cluster(&inst, 0.0, &budget, &BruteForceSolver, &mut rng).is_err());
        let delta_one = PrivacyBudget::new(1.0, 1.0).unwrap();
        assert!(dp_cluster(&inst, 0.2, &delta_one, &BruteForceSolver, &mut rng).is_err());
        // solver objective mismatch: local search is p = 1 only
        let squared = line_instance(&[0.0, 1.0, 2.0], vec![0, 1, 2], 1, 2.0);
        assert!(dp_cluster(
            &squared,
            0.2,
            &budget,
            &crate::solvers::LocalSearchSolver::default(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn budget_ledger_and_center_budget_invariants() {
        let mut gen = RandomSource::new(271);
        let coords = planted_blobs(2, 10, 12.0, 1.5, &mut gen);
        let inst = MetricInstance::euclidean(coords, (0..20).collect(), 2, 1.0).unwrap();
        let budget = PrivacyBudget::new(1.5, 0.2).unwrap();
        let eps = 0.25;
        let mut rng = RandomSource::new(8);
        let outcome = dp_cluster(&inst, eps, &budget, &BruteForceSolver, &mut rng).unwrap();
        let ledger = &outcome.log.releasable.budget;
        assert_eq!(ledger.loop_epsilon, 0.75);
        assert_eq!(ledger.laplace_epsilon, 0.75);
        assert_eq!(ledger.total_epsilon, 1.5);
        assert_eq!(ledger.total_delta, 0.2);

        let r = outcome.log.releasable.schedule.rounds();
        let m = outcome.log.releasable.picks_per_round;
        assert_eq!(m, (2.0 * 2.0 * (1.0f64 / eps).ln()).ceil() as usize);
        let total_picks: usize =
            outcome.log.releasable.rounds.iter().map(|round| round.chosen.len()).sum();
        assert!(outcome.noisy_instance.centers.len() <= total_picks);
        assert!(total_picks <= r * m);

        // the eps-prime recorded in the log follows the coverage formula
        let expect = eps_prime(0.75, 0.2);
        assert_eq!(outcome.log.releasable.eps_prime, expect);
    }

    #[test]
    fn coverage_matches_brute_force_maximum_per_round() {
        // noise-free regime: each round must cover at least (1 - eps) of the
        // best possible k-center coverage at that radius
        use itertools::Itertools;
        let mut gen = RandomSource::new(5150);
        let n = 18usize;
        let k = 2usize;
        let eps = 0.2;
        let coords: Vec<Vec<f64>> =
            (0..n).map(|_| vec![gen.uniform() * 30.0, gen.uniform() * 30.0]).collect();
        let inst = MetricInstance::euclidean(coords, (0..n).collect(), k, 1.0).unwrap();
        let budget = PrivacyBudget::new(1e6, 0.1).unwrap();
        let mut rng = RandomSource::new(17);
        let outcome = dp_cluster(&inst, eps, &budget, &BruteForceSolver, &mut rng).unwrap();

        for (round, eval) in outcome.log.evaluation.rounds.iter().enumerate() {
            let t = outcome.log.releasable.schedule.radii[round];
            let mut best = 0usize;
            for combo in (0..n).combinations(k) {
                let mut covered: Vec<usize> = Vec::new();
                for &c in &combo {
                    covered.extend(inst.ball(c, t, &eval.residual_before).unwrap());
                }
                covered.sort_unstable();
                covered.dedup();
                best = best.max(covered.len());
            }
            assert!(
                eval.covered_count as f64 >= (1.0 - eps) * best as f64 - 1e-9,
                "round {round}: covered {} < (1 - {eps}) * {best}",
                eval.covered_count
            );
        }
    }

    #[test]
    fn noisy_instance_optimum_decomposes() {
        // optimal cost of the snapped noisy instance is at most
        // 2^{p-1} * (OPT + snap cost) + (positive noise mass) * diameter^p
        let mut gen = RandomSource::new(606);
        for p in [1.0, 2.0] {
            let coords = planted_blobs(2, 8, 10.0, 2.0, &mut gen);
            let inst = MetricInstance::euclidean(coords, (0..16).collect(), 2, p).unwrap();
            let budget = PrivacyBudget::new(3.0, 0.1).unwrap();
            let mut rng = RandomSource::new(123);
            let outcome = dp_cluster(&inst, 0.2, &budget, &BruteForceSolver, &mut rng).unwrap();

            let raw_opt = BruteForceSolver
                .solve(&raw_weighted_instance(&inst).unwrap(), &mut RandomSource::new(0))
                .unwrap();
            let noisy_opt = BruteForceSolver
                .solve(&outcome.noisy_instance.to_weighted(&inst).unwrap(), &mut RandomSource::new(0))
                .unwrap();

            let snap_cost = outcome.log.evaluation.profile.snap_cost;
            let diameter = outcome.log.releasable.diameter;
            let positive_noise: f64 = outcome
                .log
                .releasable
                .raw_weights
                .iter()
                .zip(&outcome.log.evaluation.snap_counts)
                .map(|(w, &(_, count))| (w.weight - count as f64).max(0.0))
                .sum();
            let relaxed = 2.0f64.powf(p - 1.0);
            let bound =
                relaxed * (raw_opt.cost + snap_cost) + positive_noise * apply_power(diameter, p);
            assert!(
                noisy_opt.cost <= bound + 1e-6,
                "p = {p}: noisy optimum {} > bound {bound}",
                noisy_opt.cost
            );
        }
    }
}
