use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distribution::EmpiricalDistribution;
use crate::error::{validation, Result};
use crate::quantile::sorted_sq_gap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlicedConfig {
    pub n_slices: usize,
    pub seed: u64,
    /// Multiply by `d` so the value is comparable to the full squared
    /// Wasserstein distance.
    pub rescale_by_d: bool,
}

impl Default for SlicedConfig {
    fn default() -> Self {
        Self {
            n_slices: 10,
            seed: 0,
            rescale_by_d: true,
        }
    }
}

/// `count` directions drawn uniformly on the unit sphere in `R^d`
/// (normalized standard Gaussian vectors).
pub fn sphere_directions(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

fn project_sorted(dist: &EmpiricalDistribution, direction: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.resize(dist.n(), 0.0);
    for (j, w) in direction.iter().enumerate() {
        for (o, x) in out.iter_mut().zip(dist.marginal(j)) {
            *o += w * x;
        }
    }
    out.sort_unstable_by(f64::total_cmp);
}

/// Monte Carlo sliced squared 2-Wasserstein distance for equal-size samples.
pub fn sliced_wasserstein_sq(a: &EmpiricalDistribution, b: &EmpiricalDistribution, cfg: &SlicedConfig) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(validation(format!("cannot compare dimensions {} and {}", a.dim(), b.dim())));
    }
    if a.n() != b.n() {
        return Err(validation(format!(
            "sliced distance needs equal sample sizes ({} vs {})",
            a.n(),
            b.n()
        )));
    }
    if cfg.n_slices == 0 {
        return Err(validation("sliced distance needs at least one slice"));
    }
    let d = a.dim();
    let mut pa = Vec::with_capacity(a.n());
    let mut pb = Vec::with_capacity(b.n());
    let mut total = 0.0;
    for dir in sphere_directions(d, cfg.n_slices, cfg.seed) {
        project_sorted(a, &dir, &mut pa);
        project_sorted(b, &dir, &mut pb);
        total += sorted_sq_gap(&pa, &pb);
    }
    let mean = total / cfg.n_slices as f64;
    Ok(if cfg.rescale_by_d { mean * d as f64 } else { mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::wasserstein1d_sq_sorted;

    fn dist(id: &str, rows: &[Vec<f64>]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_rows(id, rows).unwrap()
    }

    #[test]
    fn directions_are_unit_and_deterministic() {
        let a = sphere_directions(4, 50, 3);
        assert!(a.iter().all(|v| (v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12));
        assert_eq!(a, sphere_directions(4, 50, 3));
        assert_ne!(a, sphere_directions(4, 50, 4));
    }

    #[test]
    fn identical_is_zero() {
        let a = dist("a", &[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.3, 0.3]]);
        for seed in 0..5 {
            let cfg = SlicedConfig { n_slices: 7, seed, rescale_by_d: true };
            assert_eq!(sliced_wasserstein_sq(&a, &a, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn one_dimension_is_exact() {
        let a = dist("a", &[vec![3.0], vec![-1.0], vec![0.5]]);
        let b = dist("b", &[vec![0.0], vec![4.0], vec![1.0]]);
        let exact = wasserstein1d_sq_sorted(&[-1.0, 0.5, 3.0], &[0.0, 1.0, 4.0]).unwrap();
        for n_slices in [1, 10, 33] {
            let cfg = SlicedConfig { n_slices, seed: 8, rescale_by_d: true };
            assert!((sliced_wasserstein_sq(&a, &b, &cfg).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn rerun_is_identical() {
        let a = dist("a", &[vec![0.0, 1.0], vec![2.0, -1.0], vec![0.3, 0.3]]);
        let b = dist("b", &[vec![1.0, 1.0], vec![2.5, 0.0], vec![-0.3, 0.9]]);
        let cfg = SlicedConfig { n_slices: 10, seed: 1, rescale_by_d: false };
        let first = sliced_wasserstein_sq(&a, &b, &cfg).unwrap();
        assert_eq!(first, sliced_wasserstein_sq(&a, &b, &cfg).unwrap());
        let rescaled = sliced_wasserstein_sq(&a, &b, &SlicedConfig { rescale_by_d: true, ..cfg }).unwrap();
        assert_eq!(rescaled, 2.0 * first);
    }

    #[test]
    fn rejects_mismatch() {
        let a = dist("a", &[vec![0.0, 1.0], vec![2.0, -1.0]]);
        let b = dist("b", &[vec![0.0], vec![2.0]]);
        assert!(sliced_wasserstein_sq(&a, &b, &SlicedConfig::default()).is_err());
    }
}
