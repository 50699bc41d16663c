//! Private maximum coverage: iterated exponential-mechanism selection of
//! covering sets, plus the deterministic greedy used as its noise-free
//! reference.
//!
//! Per pick, set `S` is chosen from the remaining family with probability
//! proportional to `exp(eps' * |S ∩ R|)` where `R` is the residual target
//! and `eps' = eps_s / (2 ln(e / delta_s))`. Chosen sets leave the family;
//! covered elements leave the residual. Sets whose marginal has dropped to
//! zero stay selectable — pruning them would condition on private data.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{exponential_select, RandomSource};

/// A set system: universe of element ids and an indexed family of subsets.
///
/// The family is a sequence, not a set: duplicate member sets are distinct
/// picks. The clustering loop relies on this, since different centers can
/// induce identical balls.
#[derive(Debug, Clone)]
pub struct CoverageInstance {
    universe: Vec<usize>,
    family: Vec<Vec<usize>>,
}

impl CoverageInstance {
    pub fn new(universe: Vec<usize>, family: Vec<Vec<usize>>) -> Result<Self> {
        let mut universe = universe;
        universe.sort_unstable();
        universe.dedup();
        let mut normalized = Vec::with_capacity(family.len());
        for (id, set) in family.into_iter().enumerate() {
            let mut set = set;
            set.sort_unstable();
            set.dedup();
            for &e in &set {
                if universe.binary_search(&e).is_err() {
                    return Err(Error::invalid(format!(
                        "family set {id} contains element {e} outside the universe"
                    )));
                }
            }
            normalized.push(set);
        }
        Ok(CoverageInstance { universe, family: normalized })
    }

    pub fn universe(&self) -> &[usize] {
        &self.universe
    }

    pub fn family(&self) -> &[Vec<usize>] {
        &self.family
    }

    fn dense_index(&self, element: usize) -> Option<usize> {
        self.universe.binary_search(&element).ok()
    }
}

/// Ordered picks with the coverage they achieved.
///
/// Only `chosen` (the id sequence) is covered by the privacy guarantee;
/// `covered` and `marginal_trace` are demand-derived diagnostics and must
/// not be released.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoverageSelection {
    /// Set ids in pick order. No repeats: chosen sets are removed.
    pub chosen: Vec<usize>,
    /// Union of the chosen sets intersected with the initial target, sorted.
    pub covered: Vec<usize>,
    /// Newly covered elements per pick; sums to `covered.len()`.
    pub marginal_trace: Vec<usize>,
}

/// `eps_s / (2 ln(e / delta_s))`; for `delta_s = 1` this is `eps_s / 2`.
pub fn eps_prime(eps_s: f64, delta_s: f64) -> f64 {
    eps_s / (2.0 * (1.0 - delta_s.ln()))
}

enum Selector<'a> {
    Greedy,
    Exponential { eps_prime: f64, rng: &'a mut RandomSource },
}

fn run_coverage(
    inst: &CoverageInstance,
    target: &[usize],
    m: usize,
    mut selector: Selector<'_>,
) -> Result<CoverageSelection> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if m > inst.family.len() {
        return Err(Error::invalid(format!(
            "m = {m} exceeds family size {}",
            inst.family.len()
        )));
    }

    let u = inst.universe.len();
    let mut residual = vec![false; u];
    for &e in target {
        let idx = inst
            .dense_index(e)
            .ok_or_else(|| Error::invalid(format!("target element {e} outside the universe")))?;
        residual[idx] = true;
    }
    let in_target = residual.clone();

    let mut available: Vec<bool> = vec![true; inst.family.len()];
    let mut covered_flags = vec![false; u];
    let mut chosen = Vec::with_capacity(m);
    let mut marginal_trace = Vec::with_capacity(m);

    for _ in 0..m {
        let ids: Vec<usize> = (0..inst.family.len()).filter(|&i| available[i]).collect();
        let marginals: Vec<usize> = ids
            .iter()
            .map(|&id| {
                inst.family[id]
                    .iter()
                    .filter(|&&e| residual[inst.dense_index(e).unwrap()])
                    .count()
            })
            .collect();

        let pick = match &mut selector {
            Selector::Greedy => {
                // max marginal, ties by lowest set id (ids are ascending)
                let mut best = 0usize;
                for (j, &marg) in marginals.iter().enumerate() {
                    if marg > marginals[best] {
                        best = j;
                    }
                }
                best
            }
            Selector::Exponential { eps_prime, rng } => {
                let scores: Vec<f64> = marginals.iter().map(|&c| c as f64).collect();
                exponential_select(&scores, *eps_prime, rng)?
            }
        };

        let id = ids[pick];
        available[id] = false;
        marginal_trace.push(marginals[pick]);
        chosen.push(id);
        for &e in &inst.family[id] {
            let idx = inst.dense_index(e).unwrap();
            residual[idx] = false;
            if in_target[idx] {
                covered_flags[idx] = true;
            }
        }
    }

    let covered: Vec<usize> = inst
        .universe
        .iter()
        .enumerate()
        .filter(|&(idx, _)| covered_flags[idx])
        .map(|(_, &e)| e)
        .collect();

    Ok(CoverageSelection { chosen, covered, marginal_trace })
}

/// Exactly `m` sequential exponential-mechanism picks over the family, with
/// per-pick selection probability proportional to `exp(eps' * marginal)`.
pub fn private_max_coverage(
    inst: &CoverageInstance,
    target: &[usize],
    eps_s: f64,
    delta_s: f64,
    m: usize,
    rng: &mut RandomSource,
) -> Result<CoverageSelection> {
    if !(eps_s.is_finite() && eps_s >= 0.0) {
        return Err(Error::invalid(format!("eps_s must be a nonnegative real, got {eps_s}")));
    }
    if !(delta_s > 0.0 && delta_s <= 1.0) {
        return Err(Error::invalid(format!("delta_s must lie in (0, 1], got {delta_s}")));
    }
    let eps = eps_prime(eps_s, delta_s);
    run_coverage(inst, target, m, Selector::Exponential { eps_prime: eps, rng })
}

/// Deterministic exact greedy: each pick maximizes the marginal, ties broken
/// by the lowest set id.
pub fn greedy_max_coverage(
    inst: &CoverageInstance,
    target: &[usize],
    m: usize,
) -> Result<CoverageSelection> {
    run_coverage(inst, target, m, Selector::Greedy)
}

/// Elements of `target` the selection left uncovered.
pub fn coverage_deficit(selection: &CoverageSelection, target: &[usize]) -> usize {
    let mut target: Vec<usize> = target.to_vec();
    target.sort_unstable();
    target.dedup();
    let covered_in_target = selection
        .covered
        .iter()
        .filter(|e| target.binary_search(e).is_ok())
        .count();
    target.len() - covered_in_target
}
