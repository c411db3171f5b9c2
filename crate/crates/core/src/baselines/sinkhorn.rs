//! Entropic optimal transport with log-domain Sinkhorn iterations.

use serde::{Deserialize, Serialize};

use crate::distribution::EmpiricalDistribution;
use crate::error::{validation, NptError, Result};

use super::exact::CostMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once the largest row-marginal violation drops below this.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            max_iters: 10_000,
            tolerance: 1e-9,
        }
    }
}

impl SinkhornConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(validation(format!("sinkhorn epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(validation("sinkhorn needs max_iters >= 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(validation("sinkhorn tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOutcome {
    /// `<plan, cost>` without the entropy term.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub marginal_violation: f64,
}

// how often the (full-matrix) marginal check runs
const CHECK_EVERY: usize = 10;

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Runs Sinkhorn on an explicit cost matrix with uniform marginals.
pub fn sinkhorn_on_cost(cost: &CostMatrix, cfg: &SinkhornConfig) -> Result<SinkhornOutcome> {
    cfg.validate()?;
    let (rows, cols) = (cost.rows(), cost.cols());
    if rows == 0 || cols == 0 {
        return Err(validation("sinkhorn needs nonempty samples"));
    }
    let eps = cfg.epsilon;
    let log_a = -(rows as f64).ln();
    let log_b = -(cols as f64).ln();
    let a = 1.0 / rows as f64;
    let c = cost.entries();

    let mut f = vec![0.0f64; rows];
    let mut g = vec![0.0f64; cols];
    let mut iterations = 0;
    let mut converged = false;
    let mut violation = f64::INFINITY;

    while iterations < cfg.max_iters {
        iterations += 1;
        for (i, fi) in f.iter_mut().enumerate() {
            let row = &c[i * cols..(i + 1) * cols];
            let lse = log_sum_exp(row.iter().zip(&g).map(|(cij, gj)| (gj - cij) / eps));
            *fi = eps * (log_a - lse);
        }
        for (j, gj) in g.iter_mut().enumerate() {
            let lse = log_sum_exp((0..rows).map(|i| (f[i] - c[i * cols + j]) / eps));
            *gj = eps * (log_b - lse);
        }
        if f.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(NptError::Instability { iteration: iterations, epsilon: eps });
        }
        if iterations % CHECK_EVERY == 0 || iterations == cfg.max_iters {
            // columns are exact after the g update; check rows
            violation = (0..rows)
                .map(|i| {
                    let row = &c[i * cols..(i + 1) * cols];
                    let mass: f64 = row.iter().zip(&g).map(|(cij, gj)| ((f[i] + gj - cij) / eps).exp()).sum();
                    (mass - a).abs()
                })
                .fold(0.0, f64::max);
            if !violation.is_finite() {
                return Err(NptError::Instability { iteration: iterations, epsilon: eps });
            }
            if violation < cfg.tolerance {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("sinkhorn stopped after {iterations} iterations with marginal violation {violation:.3e} (epsilon = {eps})");
    }

    let mut total = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let cij = c[i * cols + j];
            total += ((f[i] + g[j] - cij) / eps).exp() * cij;
        }
    }
    if !total.is_finite() {
        return Err(NptError::Instability { iteration: iterations, epsilon: eps });
    }
    Ok(SinkhornOutcome {
        cost: total.max(0.0),
        iterations,
        converged,
        marginal_violation: violation,
    })
}

pub fn sinkhorn(a: &EmpiricalDistribution, b: &EmpiricalDistribution, cfg: &SinkhornConfig) -> Result<SinkhornOutcome> {
    let cost = CostMatrix::squared_euclidean(a, b)?;
    sinkhorn_on_cost(&cost, cfg)
}

/// Transport cost of the entropic plan between two samples.
pub fn sinkhorn_sq(a: &EmpiricalDistribution, b: &EmpiricalDistribution, cfg: &SinkhornConfig) -> Result<f64> {
    Ok(sinkhorn(a, b, cfg)?.cost)
}
