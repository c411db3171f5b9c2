//! Nonparanormal simulation: Toeplitz (AR(1)) latent correlation pushed
//! through a monotone mixture of an exponential and a softplus-like map.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{DistributionCollection, EmpiricalDistribution};
use crate::error::{validation, NptError, Result};
use crate::latent::CorrelationMatrix;

/// Parameters of one simulated distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NpnSpec {
    pub rho: f64,
    pub lambda: f64,
    pub d: usize,
    pub n: usize,
    pub seed: u64,
}

impl NpnSpec {
    fn validate(&self) -> Result<()> {
        if !(self.rho.abs() < 1.0) {
            return Err(validation(format!("rho must satisfy |rho| < 1, got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(validation(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if self.d == 0 {
            return Err(validation("dimension must be at least 1"));
        }
        if self.n < 2 {
            return Err(validation("need at least 2 samples"));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!("rho{:+.4}_lambda{:.4}", self.rho, self.lambda)
    }
}

/// A rectangular `(rho, lambda)` design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub rho_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub base_seed: u64,
}

impl SimulationGrid {
    /// `rows` values of rho evenly spaced over [-0.8, 0.8] and `cols` values of
    /// lambda over [0, 1], endpoints included.
    pub fn rectangular(rows: usize, cols: usize, n: usize, d: usize, base_seed: u64) -> Self {
        Self {
            rho_values: linspace(-0.8, 0.8, rows),
            lambda_values: linspace(0.0, 1.0, cols),
            n,
            d,
            base_seed,
        }
    }

    /// The 10 x 10 design with 100 samples per distribution.
    pub fn standard(d: usize, base_seed: u64) -> Self {
        Self::rectangular(10, 10, 100, d, base_seed)
    }

    pub fn specs(&self) -> Vec<NpnSpec> {
        let mut out = Vec::with_capacity(self.rho_values.len() * self.lambda_values.len());
        for &rho in &self.rho_values {
            for &lambda in &self.lambda_values {
                let index = out.len() as u64;
                out.push(NpnSpec {
                    rho,
                    lambda,
                    d: self.d,
                    n: self.n,
                    seed: self.base_seed.wrapping_add(index),
                });
            }
        }
        out
    }
}

/// `count` evenly spaced values from `start` to `end` inclusive. A single
/// value sits at the midpoint.
pub fn linspace(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (start + end)],
        _ => {
            let step = (end - start) / (count - 1) as f64;
            (0..count)
                .map(|k| if k == count - 1 { end } else { start + step * k as f64 })
                .collect()
        }
    }
}

pub fn toeplitz_correlation(rho: f64, d: usize) -> Result<CorrelationMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(validation(format!("rho must satisfy |rho| < 1, got {rho}")));
    }
    if d == 0 {
        return Err(validation("dimension must be at least 1"));
    }
    let m = DMatrix::from_fn(d, d, |j, k| rho.powi(j.abs_diff(k) as i32));
    CorrelationMatrix::new(m)
}

/// `log(1 + 0.8 e^z)` without overflow for large `z`.
fn log_one_plus_scaled_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (0.8 + (-z).exp()).ln()
    } else {
        (0.8 * z.exp()).ln_1p()
    }
}

/// `(1 - lambda) e^{0.6 z} + lambda * 0.8 log(1 + 0.8 e^z)`, strictly
/// increasing in `z`.
pub fn marginal_transform(z: f64, lambda: f64) -> f64 {
    let soft = 0.8 * log_one_plus_scaled_exp(z);
    if lambda >= 1.0 {
        soft
    } else {
        (1.0 - lambda) * (0.6 * z).exp() + lambda * soft
    }
}

/// Draws `n` nonparanormal realizations. Rows are generated in order from a
/// single seeded stream, so a smaller `n` yields a prefix of a larger draw.
pub fn sample_npn(spec: &NpnSpec) -> Result<EmpiricalDistribution> {
    spec.validate()?;
    let sigma = toeplitz_correlation(spec.rho, spec.d)?;
    let chol = Cholesky::new(sigma.into_inner())
        .ok_or_else(|| NptError::Numerical("cholesky factorization of the latent correlation failed".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = DMatrix::zeros(spec.n, spec.d);
    let mut z = DVector::zeros(spec.d);
    for k in 0..spec.n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let latent = &l * &z;
        for j in 0..spec.d {
            samples[(k, j)] = marginal_transform(latent[j], spec.lambda);
        }
    }
    EmpiricalDistribution::new(spec.id(), samples)
}

/// One distribution per grid cell, rho-major. Cells are generated in
/// parallel; each has its own seed so the result is order-independent.
pub fn generate_grid(grid: &SimulationGrid) -> Result<DistributionCollection> {
    let specs = grid.specs();
    if specs.is_empty() {
        return Err(validation("simulation grid is empty"));
    }
    let distributions = specs.par_iter().map(sample_npn).collect::<Result<Vec<_>>>()?;
    DistributionCollection::new(distributions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{estimate_latent_correlation, kendall_tau};
    use rand::Rng;

    #[test]
    fn toeplitz_values() {
        assert_eq!(toeplitz_correlation(0.0, 3).unwrap().matrix(), &DMatrix::identity(3, 3));
        assert_eq!(
            toeplitz_correlation(0.5, 2).unwrap().matrix(),
            &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])
        );
        let m = toeplitz_correlation(0.8, 5).unwrap();
        assert!(crate::latent::min_eigenvalue(m.matrix()).unwrap() > 0.0);
        assert!(toeplitz_correlation(1.0, 2).is_err());
    }

    #[test]
    fn transform_values() {
        assert_eq!(marginal_transform(0.0, 0.0), 1.0);
        assert!((marginal_transform(0.0, 1.0) - 0.8 * 1.8f64.ln()).abs() < 1e-15);
        assert!((marginal_transform(0.0, 1.0) - 0.470_229).abs() < 1e-6);
        for lambda in [0.0, 0.5, 1.0] {
            assert!(marginal_transform(1.0, lambda) > marginal_transform(0.0, lambda));
        }
        assert!(marginal_transform(800.0, 1.0).is_finite());
        assert!((marginal_transform(800.0, 1.0) - 0.8 * (800.0 + 0.8f64.ln())).abs() < 1e-9);
    }

    #[test]
    fn transform_is_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-10.0..10.0);
            let b: f64 = a + rng.random_range(1e-6..5.0);
            let lambda: f64 = rng.random();
            assert!(marginal_transform(b, lambda) > marginal_transform(a, lambda));
        }
    }

    #[test]
    fn sampling_is_deterministic_and_prefix_stable() {
        let spec = NpnSpec { rho: 0.3, lambda: 0.4, d: 3, n: 50, seed: 9 };
        let a = sample_npn(&spec).unwrap();
        assert_eq!(a, sample_npn(&spec).unwrap());
        let longer = sample_npn(&NpnSpec { n: 80, ..spec.clone() }).unwrap();
        assert_eq!(longer.truncated(50).unwrap(), a);
    }

    #[test]
    fn exponential_marginals_are_positive() {
        let spec = NpnSpec { rho: -0.7, lambda: 0.0, d: 2, n: 500, seed: 1 };
        assert!(sample_npn(&spec).unwrap().samples().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn latent_rho_is_recovered() {
        let spec = NpnSpec { rho: 0.6, lambda: 0.5, d: 2, n: 10_000, seed: 4 };
        let est = estimate_latent_correlation(&sample_npn(&spec).unwrap()).unwrap();
        assert!((est.matrix()[(0, 1)] - 0.6).abs() < 0.03, "{}", est.matrix()[(0, 1)]);
    }

    #[test]
    fn marginal_transform_preserves_tau_of_latent() {
        // same seed and rho, different lambda: ranks are identical
        let a = sample_npn(&NpnSpec { rho: 0.4, lambda: 0.0, d: 2, n: 300, seed: 5 }).unwrap();
        let b = sample_npn(&NpnSpec { rho: 0.4, lambda: 1.0, d: 2, n: 300, seed: 5 }).unwrap();
        assert_eq!(
            kendall_tau(a.marginal(0), a.marginal(1)).unwrap(),
            kendall_tau(b.marginal(0), b.marginal(1)).unwrap()
        );
    }

    #[test]
    fn grid_shape_and_determinism() {
        let g = SimulationGrid::rectangular(2, 2, 20, 2, 3);
        let c = generate_grid(&g).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c, generate_grid(&g).unwrap());

        let standard = generate_grid(&SimulationGrid::standard(2, 1)).unwrap();
        assert_eq!(standard.len(), 100);
        assert!(standard.distributions().iter().all(|d| d.n() == 100));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-0.8, 0.8, 10).first(), Some(&-0.8));
        assert_eq!(linspace(-0.8, 0.8, 10).last(), Some(&0.8));
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
