use crate::distribution::EmpiricalDistribution;
use crate::error::{validation, NptError, Result};

use super::assignment::solve_assignment;

/// Largest sample size accepted by [`exact_ot_sq`].
pub const EXACT_SIZE_LIMIT: usize = 2000;

/// Dense squared-Euclidean cost matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn squared_euclidean(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(validation(format!(
                "cannot compare dimensions {} and {}",
                a.dim(),
                b.dim()
            )));
        }
        let (rows, cols) = (a.n(), b.n());
        let mut entries = vec![0.0; rows * cols];
        for j in 0..a.dim() {
            let (xa, xb) = (a.marginal(j), b.marginal(j));
            for (r, x) in xa.iter().enumerate() {
                let row = &mut entries[r * cols..(r + 1) * cols];
                for (cell, y) in row.iter_mut().zip(xb) {
                    let g = x - y;
                    *cell += g * g;
                }
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn mean(&self) -> f64 {
        self.entries.iter().sum::<f64>() / self.entries.len() as f64
    }
}

/// Exact squared 2-Wasserstein distance between two uniform empirical
/// measures of equal size.
///
/// With equal uniform weights some optimal coupling is a permutation, so the
/// transport problem reduces to an assignment problem.
pub fn exact_ot_sq(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> Result<f64> {
    if a.n() != b.n() {
        return Err(NptError::Unsupported(format!(
            "exact transport needs equal sample sizes ({} vs {}); use sinkhorn for unequal sizes",
            a.n(),
            b.n()
        )));
    }
    let n = a.n();
    if n > EXACT_SIZE_LIMIT {
        return Err(NptError::SizeGuard {
            size: n,
            limit: EXACT_SIZE_LIMIT,
        });
    }
    let cost = CostMatrix::squared_euclidean(a, b)?;
    let assignment = solve_assignment(cost.entries(), n)?;
    let total: f64 = assignment.iter().enumerate().map(|(r, &c)| cost.get(r, c)).sum();
    Ok(total / n as f64)
}
