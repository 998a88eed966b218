//! Seeded Monte Carlo over path samplers.
//!
//! Sample `i` of a run with seed `s` always draws from ChaCha8 stream `i` of
//! key `s`, so estimates do not depend on how the work is split across
//! threads. Partial sums are formed over fixed chunks and combined in order.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Path, TimeGrid};
use crate::numerics::CompensatedSum;

/// Number of samples per reduction chunk.
pub const CHUNK: usize = 4096;

/// RNG for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw a vector of independent standard normals.
pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Something that produces random paths on a fixed grid.
pub trait PathSampler: Sync {
    fn grid(&self) -> &TimeGrid;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Path>;
}

/// Scalar Brownian motion `x(t_a) = x0`, `Var x(t) = diffusion · (t − t_a)`.
#[derive(Debug, Clone)]
pub struct BrownianSampler {
    grid: TimeGrid,
    x0: f64,
    diffusion: f64,
}

impl BrownianSampler {
    pub fn new(grid: &TimeGrid, x0: f64) -> Self {
        Self::with_diffusion(grid, x0, 1.0)
    }

    pub fn with_diffusion(grid: &TimeGrid, x0: f64, diffusion: f64) -> Self {
        Self {
            grid: grid.clone(),
            x0,
            diffusion,
        }
    }
}

impl PathSampler for BrownianSampler {
    fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Path> {
        let nodes = self.grid.nodes();
        let mut values = Vec::with_capacity(nodes.len());
        let mut x = self.x0;
        values.push(x);
        for w in nodes.windows(2) {
            let z: f64 = StandardNormal.sample(rng);
            x += (self.diffusion * (w[1] - w[0])).sqrt() * z;
            values.push(x);
        }
        Path::from_values(&self.grid, 1, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: Complex64,
    pub stderr: f64,
    pub samples: usize,
}

/// Evaluate `F` on `n_samples` paths and return every value in sample order.
pub fn mc_values(
    sampler: &dyn PathSampler,
    f: &(dyn Fn(&Path) -> Complex64 + Sync),
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Complex64>> {
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let path = sampler.sample(&mut rng)?;
            Ok(f(&path))
        })
        .collect()
}

/// Sample mean of `F` and its standard error.
pub fn mc_expectation(
    sampler: &dyn PathSampler,
    f: &(dyn Fn(&Path) -> Complex64 + Sync),
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let values = mc_values(sampler, f, n_samples, seed)?;
    let (mean, stderr) = mean_and_stderr(&values);
    Ok(McEstimate {
        estimate: mean,
        stderr,
        samples: n_samples,
    })
}

/// Mean and standard error, with chunked compensated sums.
pub fn mean_and_stderr(values: &[Complex64]) -> (Complex64, f64) {
    let n = values.len() as f64;
    let sum = chunked_sum(values, |v| *v);
    let mean = sum / n;
    let ss = chunked_sum(values, |v| Complex64::new((v - mean).norm_sqr(), 0.0)).re;
    (mean, (ss / (n * (n - 1.0))).sqrt())
}

fn chunked_sum(values: &[Complex64], g: impl Fn(&Complex64) -> Complex64 + Sync) -> Complex64 {
    let partials: Vec<Complex64> = values
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = CompensatedSum::<Complex64>::default();
            for v in chunk {
                acc.add(g(v));
            }
            acc.total()
        })
        .collect();
    let mut acc = CompensatedSum::<Complex64>::default();
    for p in partials {
        acc.add(p);
    }
    acc.total()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn constant_functional_has_no_spread() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let s = BrownianSampler::new(&g, 0.0);
        let r = mc_expectation(&s, &|_| Complex64::new(1.0, 0.0), 1000, 7).unwrap();
        assert_eq!(r.estimate, Complex64::new(1.0, 0.0));
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn brownian_endpoint_moments() {
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let s = BrownianSampler::new(&g, 0.0);
        let first = mc_expectation(&s, &|p| Complex64::new(p.scalar(10), 0.0), 20_000, 3).unwrap();
        assert!(first.estimate.re.abs() <= 3.0 * first.stderr);
        let second =
            mc_expectation(&s, &|p| Complex64::new(p.scalar(10).powi(2), 0.0), 20_000, 3).unwrap();
        assert!((second.estimate.re - 1.0).abs() <= 3.0 * second.stderr);
    }

    #[test]
    fn identical_seeds_give_identical_bits() {
        let g = make_grid(0.0, 2.0, 9).unwrap();
        let s = BrownianSampler::new(&g, 1.0);
        let f = |p: &Path| Complex64::new(p.scalar(8).sin(), 0.0);
        let a = mc_expectation(&s, &f, 10_000, 99).unwrap();
        let b = mc_expectation(&s, &f, 10_000, 99).unwrap();
        assert_eq!(a.estimate.re.to_bits(), b.estimate.re.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn too_few_samples() {
        let g = make_grid(0.0, 1.0, 3).unwrap();
        let s = BrownianSampler::new(&g, 0.0);
        assert!(mc_expectation(&s, &|_| Complex64::new(1.0, 0.0), 1, 0).is_err());
    }
}
