//! Point sets, distance oracles, powered costs, balls, and diameters.
//!
//! A [`MetricInstance`] bundles the public point set `V` (either Euclidean
//! coordinates or an explicit distance matrix), the private demand multiset
//! `D` (indices into `V`, duplicates encode weights), the target center
//! count `k`, and the cost power `p`. All operations are pure reads after
//! construction.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Number of random triples checked for the triangle inequality when an
/// explicit matrix is ingested. Exhaustive below this budget.
const TRIANGLE_SAMPLE_BUDGET: usize = 10_000;

/// Fixed seed for the sampled triangle check so validation is reproducible.
const TRIANGLE_CHECK_SEED: u64 = 0x7419_c0de;

/// The public point set together with its distance oracle.
#[derive(Debug, Clone)]
pub enum Geometry {
    /// Points are rows of real coordinates; distances are Euclidean.
    Euclidean { coords: Vec<Vec<f64>> },
    /// Explicit symmetric distance matrix, row-major.
    Matrix { n: usize, entries: Vec<f64> },
}

impl Geometry {
    pub fn euclidean(coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point set must be nonempty"));
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::invalid("points must have at least one coordinate"));
        }
        for (i, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has dimension {} but point 0 has dimension {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(Geometry::Euclidean { coords })
    }

    /// Validates symmetry, zero diagonal, nonnegativity, and the triangle
    /// inequality on sampled triples (exhaustive for small `n`).
    pub fn matrix(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("point set must be nonempty"));
        }
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "matrix has {} entries, expected {}",
                entries.len(),
                n * n
            )));
        }
        for i in 0..n {
            let d_ii = entries[i * n + i];
            if d_ii != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal entry at ({i}, {i}): {d_ii}")));
            }
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::invalid(format!("invalid distance at ({i}, {j}): {a}")));
                }
                if a != b {
                    return Err(Error::AsymmetricMatrix { i, j, a, b });
                }
            }
        }
        let geom = Geometry::Matrix { n, entries };
        geom.check_triangle_sampled()?;
        Ok(geom)
    }

    fn check_triangle_sampled(&self) -> Result<()> {
        let n = self.len();
        let check = |a: usize, b: usize, c: usize| -> Result<()> {
            let lhs = self.distance_unchecked(a, b);
            let rhs = self.distance_unchecked(a, c) + self.distance_unchecked(c, b);
            // tiny slack so float-rounded but honest matrices are not rejected
            if lhs > rhs + 1e-9 * rhs.max(1.0) {
                return Err(Error::TriangleViolation { a, b, c, lhs, rhs });
            }
            Ok(())
        };
        if n * n * n <= TRIANGLE_SAMPLE_BUDGET {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(TRIANGLE_CHECK_SEED);
            for _ in 0..TRIANGLE_SAMPLE_BUDGET {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                let c = rng.random_range(0..n);
                check(a, b, c)?;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match self {
            Geometry::Euclidean { coords } => coords.len(),
            Geometry::Matrix { n, .. } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate rows in Euclidean mode, `None` for matrix mode.
    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        match self {
            Geometry::Euclidean { coords } => Some(coords),
            Geometry::Matrix { .. } => None,
        }
    }

    fn distance_unchecked(&self, u: usize, v: usize) -> f64 {
        match self {
            Geometry::Euclidean { coords } => {
                let (a, b) = (&coords[u], &coords[v]);
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            }
            Geometry::Matrix { n, entries } => entries[u * n + v],
        }
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<f64> {
        let n = self.len();
        for idx in [u, v] {
            if idx >= n {
                return Err(Error::IndexOutOfRange { index: idx, n });
            }
        }
        Ok(self.distance_unchecked(u, v))
    }

    /// Exact diameter via the full O(n^2) pairwise scan.
    pub fn diameter_exact(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for u in 0..n {
            for v in (u + 1)..n {
                best = best.max(self.distance_unchecked(u, v));
            }
        }
        best
    }

    /// 2-approximate diameter from a single farthest-point sweep: returns a
    /// value in `[diameter/2, diameter]` in O(n) distance evaluations.
    pub fn diameter_sweep(&self) -> f64 {
        let n = self.len();
        if n <= 1 {
            return 0.0;
        }
        let far = (0..n)
            .max_by(|&a, &b| {
                self.distance_unchecked(0, a)
                    .total_cmp(&self.distance_unchecked(0, b))
            })
            .unwrap();
        (0..n)
            .map(|v| self.distance_unchecked(far, v))
            .fold(0.0, f64::max)
    }
}

/// How the diameter feeding the threshold schedule was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiameterMode {
    Exact,
    /// Farthest-point sweep; the reported value may undershoot the true
    /// diameter by at most a factor of 2.
    Sweep,
}

/// A clustering problem: public points, private demand, target `k`, power `p`.
#[derive(Debug, Clone)]
pub struct MetricInstance {
    geometry: Geometry,
    demand: Vec<usize>,
    k: usize,
    power: f64,
}

impl MetricInstance {
    pub fn new(geometry: Geometry, demand: Vec<usize>, k: usize, power: f64) -> Result<Self> {
        let n = geometry.len();
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k = {k} must satisfy 1 <= k <= n = {n}")));
        }
        if !(power.is_finite() && power >= 1.0) {
            return Err(Error::invalid(format!("power p = {power} must be a finite real >= 1")));
        }
        for &d in &demand {
            if d >= n {
                return Err(Error::IndexOutOfRange { index: d, n });
            }
        }
        Ok(MetricInstance { geometry, demand, k, power })
    }

    pub fn euclidean(coords: Vec<Vec<f64>>, demand: Vec<usize>, k: usize, power: f64) -> Result<Self> {
        Self::new(Geometry::euclidean(coords)?, demand, k, power)
    }

    pub fn from_matrix(
        n: usize,
        entries: Vec<f64>,
        demand: Vec<usize>,
        k: usize,
        power: f64,
    ) -> Result<Self> {
        Self::new(Geometry::matrix(n, entries)?, demand, k, power)
    }

    /// Same point set and parameters with a different demand multiset.
    /// Used to build neighboring instances for privacy audits.
    pub fn with_demand(&self, demand: Vec<usize>) -> Result<Self> {
        Self::new(self.geometry.clone(), demand, self.k, self.power)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn n_points(&self) -> usize {
        self.geometry.len()
    }

    /// The private demand multiset as indices into the point set.
    pub fn demand(&self) -> &[usize] {
        &self.demand
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn distance(&self, u: usize, v: usize) -> Result<f64> {
        self.geometry.distance(u, v)
    }

    /// `distance(u, v)^p`.
    pub fn powered_distance(&self, u: usize, v: usize) -> Result<f64> {
        Ok(apply_power(self.geometry.distance(u, v)?, self.power))
    }

    pub fn diameter(&self, mode: DiameterMode) -> f64 {
        match mode {
            DiameterMode::Exact => self.geometry.diameter_exact(),
            DiameterMode::Sweep => self.geometry.diameter_sweep(),
        }
    }

    /// Closed ball: demand slots from `restrict` whose point lies within
    /// (un-powered) `radius` of `center`.
    pub fn ball(&self, center: usize, radius: f64, restrict: &[usize]) -> Result<Vec<usize>> {
        let n = self.n_points();
        if center >= n {
            return Err(Error::IndexOutOfRange { index: center, n });
        }
        if !(radius >= 0.0) {
            return Err(Error::invalid(format!("radius must be >= 0, got {radius}")));
        }
        let mut out = Vec::new();
        for &slot in restrict {
            let point = *self
                .demand
                .get(slot)
                .ok_or(Error::IndexOutOfRange { index: slot, n: self.demand.len() })?;
            if self.geometry.distance_unchecked(center, point) <= radius {
                out.push(slot);
            }
        }
        Ok(out)
    }

    /// Nearest center to `point` by un-powered distance, ties broken by the
    /// lowest center index. `centers` must be nonempty.
    pub fn nearest_center(&self, point: usize, centers: &[usize]) -> Result<(usize, f64)> {
        if centers.is_empty() {
            return Err(Error::invalid("centers must be nonempty"));
        }
        let n = self.n_points();
        let mut sorted: Vec<usize> = centers.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut best = (usize::MAX, f64::INFINITY);
        for &c in &sorted {
            if c >= n {
                return Err(Error::IndexOutOfRange { index: c, n });
            }
            let d = self.geometry.distance_unchecked(point, c);
            if d < best.1 {
                best = (c, d);
            }
        }
        Ok(best)
    }

    /// Objective value over the demand multiset: sum of powered distances to
    /// the nearest center, plus the slot-to-center assignment.
    pub fn clustering_cost(&self, centers: &[usize]) -> Result<(f64, Vec<usize>)> {
        if centers.is_empty() {
            return Err(Error::invalid("centers must be nonempty"));
        }
        let mut cost = 0.0;
        let mut assignment = Vec::with_capacity(self.demand.len());
        for &point in &self.demand {
            let (c, d) = self.nearest_center(point, centers)?;
            cost += apply_power(d, self.power);
            assignment.push(c);
        }
        Ok((cost, assignment))
    }
}

/// `d^p`, exact for the common powers 1 and 2.
pub fn apply_power(d: f64, p: f64) -> f64 {
    if p == 1.0 {
        d
    } else if p == 2.0 {
        d * d
    } else {
        d.powf(p)
    }
}

/// A set of at most `k` centers with its objective value and the
/// demand-slot-to-center assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringSolution {
    pub centers: Vec<usize>,
    pub cost: f64,
    pub assignment: Vec<usize>,
}
