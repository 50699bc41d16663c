//! Pluggable non-private clustering black boxes over weighted instances:
//! exact brute force (the test oracle), single-swap local search for
//! k-medians, and a facility-restricted weighted Lloyd heuristic for
//! Euclidean k-means.
//!
//! Centers are always drawn from the facility set, even in Euclidean mode;
//! continuous centroids are snapped back to facilities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::RandomSource;
use crate::metric::{apply_power, ClusteringSolution, Geometry};

/// Enumeration guard for the brute-force solver.
const BRUTE_FORCE_GUARD: u128 = 1_000_000;

/// Relative improvement a swap must achieve to be accepted; guarantees
/// termination under floating point.
const LOCAL_SEARCH_REL_IMPROVEMENT: f64 = 1e-9;

/// A discrete weighted clustering problem: pick `k` facilities minimizing
/// the weighted powered cost over the demand points.
#[derive(Debug, Clone)]
pub struct WeightedInstance<'a> {
    geometry: &'a Geometry,
    facilities: Vec<usize>,
    demand: Vec<(usize, f64)>,
    k: usize,
    power: f64,
}

impl<'a> WeightedInstance<'a> {
    pub fn new(
        geometry: &'a Geometry,
        facilities: Vec<usize>,
        demand: Vec<(usize, f64)>,
        k: usize,
        power: f64,
    ) -> Result<Self> {
        let n = geometry.len();
        let mut facilities = facilities;
        facilities.sort_unstable();
        facilities.dedup();
        if facilities.is_empty() {
            return Err(Error::invalid("facility set must be nonempty"));
        }
        if k == 0 || k > facilities.len() {
            return Err(Error::invalid(format!(
                "k = {k} must satisfy 1 <= k <= |facilities| = {}",
                facilities.len()
            )));
        }
        if !(power.is_finite() && power >= 1.0) {
            return Err(Error::invalid(format!("power p = {power} must be >= 1")));
        }
        for &f in &facilities {
            if f >= n {
                return Err(Error::IndexOutOfRange { index: f, n });
            }
        }
        for &(d, w) in &demand {
            if d >= n {
                return Err(Error::IndexOutOfRange { index: d, n });
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("demand weight must be a nonnegative real, got {w}")));
            }
        }
        Ok(WeightedInstance { geometry, facilities, demand, k, power })
    }

    pub fn geometry(&self) -> &Geometry {
        self.geometry
    }

    /// Sorted, deduplicated candidate centers.
    pub fn facilities(&self) -> &[usize] {
        &self.facilities
    }

    pub fn demand(&self) -> &[(usize, f64)] {
        &self.demand
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// Weighted powered cost of a center set plus the demand-to-center
    /// assignment (nearest center, ties by lowest index).
    pub fn evaluate(&self, centers: &[usize]) -> Result<(f64, Vec<usize>)> {
        if centers.is_empty() {
            return Err(Error::invalid("centers must be nonempty"));
        }
        let mut sorted = centers.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut cost = 0.0;
        let mut assignment = Vec::with_capacity(self.demand.len());
        for &(point, weight) in &self.demand {
            let mut best = (usize::MAX, f64::INFINITY);
            for &c in &sorted {
                let d = self.geometry.distance(point, c)?;
                if d < best.1 {
                    best = (c, d);
                }
            }
            cost += weight * apply_power(best.1, self.power);
            assignment.push(best.0);
        }
        Ok((cost, assignment))
    }
}

/// What a solver promises about its output quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproxFactor {
    Exact,
    Factor(f64),
    Heuristic,
}

/// Which objective powers a solver accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSupport {
    KMedians,
    KMeans,
    Any,
}

impl PowerSupport {
    pub fn supports(&self, power: f64) -> bool {
        match self {
            PowerSupport::KMedians => power == 1.0,
            PowerSupport::KMeans => power == 2.0,
            PowerSupport::Any => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverDescriptor {
    pub name: String,
    pub approx_factor: ApproxFactor,
    pub power: PowerSupport,
}

/// The non-private clustering interface the DP pipeline's last step calls.
pub trait BlackBoxSolver {
    fn descriptor(&self) -> SolverDescriptor;

    /// Returns exactly `k` facility indices and the weighted powered cost.
    /// Deterministic given the random source's seed.
    fn solve(&self, inst: &WeightedInstance<'_>, rng: &mut RandomSource) -> Result<ClusteringSolution>;
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if out > BRUTE_FORCE_GUARD {
            return u128::MAX;
        }
    }
    out
}

/// Exhaustive enumeration of all k-subsets of the facility set. On cost
/// ties the lexicographically smallest center set wins (enumeration order
/// plus strict improvement).
#[derive(Debug, Clone, Default)]
pub struct BruteForceSolver;

impl BlackBoxSolver for BruteForceSolver {
    fn descriptor(&self) -> SolverDescriptor {
        SolverDescriptor {
            name: "brute_force".to_string(),
            approx_factor: ApproxFactor::Exact,
            power: PowerSupport::Any,
        }
    }

    fn solve(&self, inst: &WeightedInstance<'_>, _rng: &mut RandomSource) -> Result<ClusteringSolution> {
        let f = inst.facilities().len();
        let k = inst.k();
        if binomial(f, k) > BRUTE_FORCE_GUARD {
            return Err(Error::GuardExceeded(format!(
                "brute force refuses C({f}, {k}) > {BRUTE_FORCE_GUARD} center subsets"
            )));
        }
        let mut combo: Vec<usize> = (0..k).collect();
        let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
        loop {
            let centers: Vec<usize> = combo.iter().map(|&i| inst.facilities()[i]).collect();
            let (cost, assignment) = inst.evaluate(&centers)?;
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, centers, assignment));
            }
            // next k-combination of 0..f in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    let (cost, centers, assignment) = best.unwrap();
                    return Ok(ClusteringSolution { centers, cost, assignment });
                }
                i -= 1;
                if combo[i] != i + f - k {
                    break;
                }
            }
            combo[i] += 1;
            for j in (i + 1)..k {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
}

/// Single-swap local search for k-medians (p = 1). A swap is accepted only
/// when it improves the cost by more than a relative threshold, so the
/// search terminates at a local optimum or after `max_iters` sweeps.
#[derive(Debug, Clone)]
pub struct LocalSearchSolver {
    pub max_iters: usize,
}

impl Default for LocalSearchSolver {
    fn default() -> Self {
        LocalSearchSolver { max_iters: 1_000 }
    }
}

impl LocalSearchSolver {
    /// Runs the swap loop from an explicit starting center set.
    pub fn solve_from(
        &self,
        inst: &WeightedInstance<'_>,
        start: &[usize],
    ) -> Result<ClusteringSolution> {
        let mut centers: Vec<usize> = start.to_vec();
        centers.sort_unstable();
        centers.dedup();
        if centers.len() != inst.k() {
            return Err(Error::invalid(format!(
                "start must contain k = {} distinct facilities",
                inst.k()
            )));
        }
        let (mut cost, mut assignment) = inst.evaluate(&centers)?;
        for _ in 0..self.max_iters {
            let mut best_swap: Option<(f64, usize, usize)> = None;
            for (slot, &open) in centers.iter().enumerate() {
                for &candidate in inst.facilities() {
                    if centers.contains(&candidate) {
                        continue;
                    }
                    let mut trial = centers.clone();
                    trial[slot] = candidate;
                    let (trial_cost, _) = inst.evaluate(&trial)?;
                    if trial_cost < best_swap.as_ref().map_or(cost, |(c, _, _)| *c) {
                        best_swap = Some((trial_cost, slot, candidate));
                    }
                    let _ = open;
                }
            }
            match best_swap {
                Some((new_cost, slot, candidate))
                    if new_cost < cost * (1.0 - LOCAL_SEARCH_REL_IMPROVEMENT) =>
                {
                    centers[slot] = candidate;
                    centers.sort_unstable();
                    let evaluated = inst.evaluate(&centers)?;
                    cost = evaluated.0;
                    assignment = evaluated.1;
                    debug_assert!((cost - new_cost).abs() <= 1e-9 * (1.0 + cost));
                }
                _ => break,
            }
        }
        Ok(ClusteringSolution { centers, cost, assignment })
    }
}

impl BlackBoxSolver for LocalSearchSolver {
    fn descriptor(&self) -> SolverDescriptor {
        SolverDescriptor {
            name: "local_search".to_string(),
            approx_factor: ApproxFactor::Factor(5.0),
            power: PowerSupport::KMedians,
        }
    }

    fn solve(&self, inst: &WeightedInstance<'_>, _rng: &mut RandomSource) -> Result<ClusteringSolution> {
        if inst.power() != 1.0 {
            return Err(Error::invalid("local search supports the k-medians objective (p = 1) only"));
        }
        let start: Vec<usize> = inst.facilities()[..inst.k()].to_vec();
        self.solve_from(inst, &start)
    }
}

/// Weighted Lloyd iterations for Euclidean k-means (p = 2) with centers
/// restricted to the facility set: each update computes weighted centroids
/// and snaps them to the nearest facility. A center-set update is kept only
/// if it lowers the cost, so the per-run cost trace is monotone
/// non-increasing. Runs `restarts` seeded starts and keeps the best.
#[derive(Debug, Clone)]
pub struct LloydWeightedSolver {
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for LloydWeightedSolver {
    fn default() -> Self {
        LloydWeightedSolver { restarts: 8, max_iters: 100 }
    }
}

impl LloydWeightedSolver {
    /// One Lloyd run from an explicit starting center set. Returns the
    /// solution and the cost trace (one entry per accepted iterate,
    /// starting cost first).
    pub fn run_from(
        &self,
        inst: &WeightedInstance<'_>,
        start: &[usize],
    ) -> Result<(ClusteringSolution, Vec<f64>)> {
        let coords = inst
            .geometry()
            .coords()
            .ok_or_else(|| Error::invalid("weighted Lloyd requires Euclidean coordinates"))?;
        let dim = coords[0].len();
        let mut centers: Vec<usize> = start.to_vec();
        centers.sort_unstable();
        centers.dedup();
        if centers.len() != inst.k() {
            return Err(Error::invalid(format!(
                "start must contain k = {} distinct facilities",
                inst.k()
            )));
        }
        let (mut cost, mut assignment) = inst.evaluate(&centers)?;
        let mut trace = vec![cost];

        for _ in 0..self.max_iters {
            // weighted centroid per open center
            let mut sums: Vec<Vec<f64>> = vec![vec![0.0; dim]; centers.len()];
            let mut mass: Vec<f64> = vec![0.0; centers.len()];
            for (&(point, weight), &assigned) in inst.demand().iter().zip(&assignment) {
                let slot = centers.iter().position(|&c| c == assigned).unwrap();
                for (s, &x) in sums[slot].iter_mut().zip(&coords[point]) {
                    *s += weight * x;
                }
                mass[slot] += weight;
            }

            let mut next: Vec<usize> = Vec::with_capacity(centers.len());
            for slot in 0..centers.len() {
                if mass[slot] > 0.0 {
                    let centroid: Vec<f64> = sums[slot].iter().map(|s| s / mass[slot]).collect();
                    next.push(nearest_facility_to(coords, inst.facilities(), &centroid, &next));
                } else {
                    // empty cluster: re-seed from the farthest weighted demand point
                    let far = farthest_weighted_demand(inst, &centers)?;
                    next.push(nearest_facility_to(coords, inst.facilities(), &coords[far], &next));
                }
            }
            next.sort_unstable();
            next.dedup();
            let mut fill = inst.facilities().iter().copied();
            while next.len() < inst.k() {
                let f = fill
                    .next()
                    .ok_or_else(|| Error::invalid("fewer facilities than k"))?;
                if !next.contains(&f) {
                    next.push(f);
                    next.sort_unstable();
                }
            }

            let (next_cost, next_assignment) = inst.evaluate(&next)?;
            if next_cost < cost {
                centers = next;
                cost = next_cost;
                assignment = next_assignment;
                trace.push(cost);
            } else {
                break;
            }
        }

        Ok((ClusteringSolution { centers, cost, assignment }, trace))
    }

    fn random_start(&self, inst: &WeightedInstance<'_>, rng: &mut RandomSource) -> Vec<usize> {
        let mut pool: Vec<usize> = inst.facilities().to_vec();
        let mut start = Vec::with_capacity(inst.k());
        for _ in 0..inst.k() {
            let i = rng.uniform_range(pool.len());
            start.push(pool.swap_remove(i));
        }
        start
    }
}

fn nearest_facility_to(
    coords: &[Vec<f64>],
    facilities: &[usize],
    target: &[f64],
    taken: &[usize],
) -> usize {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut best_any = (usize::MAX, f64::INFINITY);
    for &f in facilities {
        let d2: f64 = coords[f]
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d2 < best_any.1 {
            best_any = (f, d2);
        }
        if !taken.contains(&f) && d2 < best.1 {
            best = (f, d2);
        }
    }
    if best.0 != usize::MAX {
        best.0
    } else {
        best_any.0
    }
}

fn farthest_weighted_demand(inst: &WeightedInstance<'_>, centers: &[usize]) -> Result<usize> {
    let mut best = (0usize, -1.0f64);
    for &(point, weight) in inst.demand() {
        let mut d = f64::INFINITY;
        for &c in centers {
            d = d.min(inst.geometry().distance(point, c)?);
        }
        let score = weight * apply_power(d, inst.power());
        if score > best.1 {
            best = (point, score);
        }
    }
    Ok(best.0)
}

impl BlackBoxSolver for LloydWeightedSolver {
    fn descriptor(&self) -> SolverDescriptor {
        SolverDescriptor {
            name: "lloyd".to_string(),
            approx_factor: ApproxFactor::Heuristic,
            power: PowerSupport::KMeans,
        }
    }

    fn solve(&self, inst: &WeightedInstance<'_>, rng: &mut RandomSource) -> Result<ClusteringSolution> {
        if inst.power() != 2.0 {
            return Err(Error::invalid("weighted Lloyd supports the k-means objective (p = 2) only"));
        }
        if inst.geometry().coords().is_none() {
            return Err(Error::invalid("weighted Lloyd requires Euclidean coordinates"));
        }
        if self.restarts == 0 {
            return Err(Error::invalid("restarts must be at least 1"));
        }
        let mut best: Option<ClusteringSolution> = None;
        for restart in 0..self.restarts {
            let mut sub = rng.substream(restart as u64);
            let start = self.random_start(inst, &mut sub);
            let (candidate, _) = self.run_from(inst, &start)?;
            if best.as_ref().is_none_or(|b| candidate.cost < b.cost) {
                best = Some(candidate);
            }
        }
        Ok(best.unwrap())
    }
}

/// Looks a solver up by its configuration name.
pub fn solver_by_name(name: &str) -> Result<Box<dyn BlackBoxSolver>> {
    match name {
        "brute_force" => Ok(Box::new(BruteForceSolver)),
        "local_search" => Ok(Box::new(LocalSearchSolver::default())),
        "lloyd" => Ok(Box::new(LloydWeightedSolver::default())),
        other => Err(Error::invalid(format!(
            "unknown solver `{other}` (expected brute_force, local_search, or lloyd)"
        ))),
    }
}
