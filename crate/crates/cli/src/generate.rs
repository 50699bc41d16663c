//! Seeded synthetic instance generators for desk-scale experiments.

use rand_distr::{Distribution, Normal};

use dpcluster_core::{MetricInstance, RandomSource};

use crate::{HarnessError, Result};

/// How many centroid placements to try before giving up on the separation
/// constraint.
const PLACEMENT_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// Gaussian blobs with guaranteed centroid separation.
    Planted { blobs: usize, n: usize, separation: f64, noise_sd: f64, dim: usize },
    /// Uniform points in the unit cube.
    Uniform { n: usize, dim: usize },
    /// Sorted uniform points on the unit interval.
    Line { n: usize },
}

impl GeneratorSpec {
    /// Parses `planted(blobs,n,separation,noise_sd,dim)`, `uniform(n,dim)`,
    /// or `line(n)`.
    pub fn parse(text: &str) -> Result<GeneratorSpec> {
        Self::try_parse(text).ok_or_else(|| {
            HarnessError::Config(format!(
                "invalid generator spec `{text}`; expected \
                 planted(blobs,n,separation,noise_sd,dim), uniform(n,dim), or line(n)"
            ))
        })
    }

    /// `None` when the text is not shaped like a generator call (callers
    /// then treat it as a file path).
    pub fn try_parse(text: &str) -> Option<GeneratorSpec> {
        let text = text.trim();
        let open = text.find('(')?;
        if !text.ends_with(')') {
            return None;
        }
        let name = &text[..open];
        let args: Vec<&str> = text[open + 1..text.len() - 1]
            .split(',')
            .map(str::trim)
            .collect();
        match (name, args.len()) {
            ("planted", 5) => Some(GeneratorSpec::Planted {
                blobs: args[0].parse().ok()?,
                n: args[1].parse().ok()?,
                separation: args[2].parse().ok()?,
                noise_sd: args[3].parse().ok()?,
                dim: args[4].parse().ok()?,
            }),
            ("uniform", 2) => Some(GeneratorSpec::Uniform {
                n: args[0].parse().ok()?,
                dim: args[1].parse().ok()?,
            }),
            ("line", 1) => Some(GeneratorSpec::Line { n: args[0].parse().ok()? }),
            _ => None,
        }
    }
}

/// Generates the point coordinates for a spec. Identical seeds give
/// identical instances.
pub fn generate_coords(spec: &GeneratorSpec, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = RandomSource::new(seed);
    match *spec {
        GeneratorSpec::Planted { blobs, n, separation, noise_sd, dim } => {
            if blobs == 0 || n < blobs || dim == 0 {
                return Err(HarnessError::Config(
                    "planted needs blobs >= 1, n >= blobs, dim >= 1".to_string(),
                ));
            }
            if !(separation > 0.0 && noise_sd >= 0.0) {
                return Err(HarnessError::Config(
                    "planted needs separation > 0 and noise_sd >= 0".to_string(),
                ));
            }
            let box_side = separation * blobs as f64 * 2.0;
            let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(blobs);
            let mut attempts = 0usize;
            while centroids.len() < blobs {
                attempts += 1;
                if attempts > PLACEMENT_ATTEMPTS {
                    return Err(HarnessError::Config(format!(
                        "could not place {blobs} centroids at separation {separation} in \
                         {PLACEMENT_ATTEMPTS} attempts"
                    )));
                }
                let candidate: Vec<f64> = (0..dim).map(|_| rng.uniform() * box_side).collect();
                let far_enough = centroids.iter().all(|c| {
                    let d2: f64 = c
                        .iter()
                        .zip(&candidate)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    d2.sqrt() >= separation
                });
                if far_enough {
                    centroids.push(candidate);
                }
            }
            let noise = Normal::new(0.0, noise_sd)
                .map_err(|e| HarnessError::Config(format!("noise_sd: {e}")))?;
            let mut coords = Vec::with_capacity(n);
            for (b, centroid) in centroids.iter().enumerate() {
                let count = n / blobs + usize::from(b < n % blobs);
                for _ in 0..count {
                    coords.push(
                        centroid
                            .iter()
                            .map(|&c| c + noise.sample(&mut rng))
                            .collect::<Vec<f64>>(),
                    );
                }
            }
            Ok(coords)
        }
        GeneratorSpec::Uniform { n, dim } => {
            if n == 0 || dim == 0 {
                return Err(HarnessError::Config("uniform needs n >= 1 and dim >= 1".to_string()));
            }
            Ok((0..n)
                .map(|_| (0..dim).map(|_| rng.uniform()).collect())
                .collect())
        }
        GeneratorSpec::Line { n } => {
            if n == 0 {
                return Err(HarnessError::Config("line needs n >= 1".to_string()));
            }
            let mut xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            xs.sort_by(f64::total_cmp);
            Ok(xs.into_iter().map(|x| vec![x]).collect())
        }
    }
}

/// Full instance with identity demand (one demand unit per point).
pub fn generate(spec: &GeneratorSpec, seed: u64, k: usize, power: f64) -> Result<MetricInstance> {
    let coords = generate_coords(spec, seed)?;
    let demand: Vec<usize> = (0..coords.len()).collect();
    Ok(MetricInstance::euclidean(coords, demand, k, power)?)
}
