//! Latent Gaussian correlation from Kendall's tau.
//!
//! Each off-diagonal entry is `sin(pi * tau / 2)` of the pairwise sample
//! Kendall tau. For `d > 2` the elementwise estimate can be indefinite, in
//! which case it is projected back onto the positive definite cone by
//! eigenvalue clipping followed by diagonal renormalization.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::distribution::EmpiricalDistribution;
use crate::error::{validation, NptError, Result};

/// Eigenvalue floor used when projecting onto the positive definite cone.
pub const EPS_PD: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Symmetric eigendecomposition that reports failure instead of panicking.
pub(crate) fn symmetric_eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| NptError::Numerical("symmetric eigendecomposition did not converge".into()))
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(symmetric_eigen(m.clone())?.eigenvalues.min())
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// A symmetric positive semidefinite matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationMatrix(DMatrix<f64>);

impl CorrelationMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(validation("correlation matrix must be square and nonempty"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(validation("correlation matrix has non-finite entries"));
        }
        if !is_symmetric(&m, SYMMETRY_TOL) {
            return Err(validation("correlation matrix is not symmetric"));
        }
        if m.diagonal().iter().any(|v| (v - 1.0).abs() > SYMMETRY_TOL) {
            return Err(validation("correlation matrix diagonal is not 1"));
        }
        if m.iter().any(|v| v.abs() > 1.0 + SYMMETRY_TOL) {
            return Err(validation("correlation entries must lie in [-1, 1]"));
        }
        if m.nrows() > 1 && min_eigenvalue(&m)? < -EPS_PD {
            return Err(validation("correlation matrix is not positive semidefinite"));
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationMatrix {
    type Error = NptError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(validation("correlation matrix rows are ragged"));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }
}

impl From<CorrelationMatrix> for Vec<Vec<f64>> {
    fn from(c: CorrelationMatrix) -> Self {
        c.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }
}

/// Pairwise Kendall tau values with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct KendallTauMatrix(DMatrix<f64>);

impl KendallTauMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Sample Kendall tau (tau-a): the mean over pairs `k < k'` of
/// `sign(x_k - x_k') * sign(y_k - y_k')`.
///
/// Tie-free input goes through an `O(n log n)` inversion count; anything with
/// ties falls back to the direct pair sum. Both paths produce the same integer
/// numerator, so results agree bit for bit.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let s = match ranked_by(x) {
        Some(order) if !has_ties(y) => {
            let n = x.len() as i64;
            let mut ys: Vec<f64> = order.iter().map(|&k| y[k]).collect();
            let mut buf = vec![0.0; ys.len()];
            let discordant = count_inversions(&mut ys, &mut buf) as i64;
            n * (n - 1) / 2 - 2 * discordant
        }
        _ => sign_product_sum(x, y),
    };
    Ok(tau_from_sum(s, x.len()))
}

/// The literal `O(n^2)` evaluation of tau-a; used as the slow path and as a
/// reference for the fast one.
pub fn kendall_tau_direct(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(tau_from_sum(sign_product_sum(x, y), x.len()))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(validation(format!(
            "kendall tau needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(validation("kendall tau needs at least 2 observations"));
    }
    Ok(())
}

fn tau_from_sum(s: i64, n: usize) -> f64 {
    let n = n as f64;
    2.0 * s as f64 / (n * (n - 1.0))
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn sign_product_sum(x: &[f64], y: &[f64]) -> i64 {
    let n = x.len();
    let mut s = 0i64;
    for k in 0..n {
        for l in k + 1..n {
            s += sign(x[k] - x[l]) * sign(y[k] - y[l]);
        }
    }
    s
}

/// Indices that sort `x` ascending, or `None` when `x` has ties.
fn ranked_by(x: &[f64]) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]));
    if order.windows(2).any(|w| x[w[0]] == x[w[1]]) {
        None
    } else {
        Some(order)
    }
}

fn has_ties(y: &[f64]) -> bool {
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Sorts `v` with a merge sort and returns the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        count_inversions(left, lb) + count_inversions(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            // every remaining left element exceeds v[j]
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

pub fn tau_to_latent_rho(tau: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&tau) {
        return Err(validation(format!("kendall tau {tau} is outside [-1, 1]")));
    }
    Ok((FRAC_PI_2 * tau).sin())
}

pub fn kendall_tau_matrix(dist: &EmpiricalDistribution) -> Result<KendallTauMatrix> {
    let d = dist.dim();
    let mut m = DMatrix::identity(d, d);
    for j in 0..d {
        for l in j + 1..d {
            let tau = kendall_tau(dist.marginal(j), dist.marginal(l))?;
            m[(j, l)] = tau;
            m[(l, j)] = tau;
        }
    }
    Ok(KendallTauMatrix(m))
}

/// Latent correlation estimate for one distribution, projected onto the
/// positive definite cone when the elementwise estimate is not PD.
pub fn estimate_latent_correlation(dist: &EmpiricalDistribution) -> Result<CorrelationMatrix> {
    let tau = kendall_tau_matrix(dist)?;
    let mut sigma = tau.0;
    for v in sigma.iter_mut() {
        *v = tau_to_latent_rho(*v)?;
    }
    // sin(pi/2) is 1 in floating point, but pin the diagonal anyway
    sigma.fill_diagonal(1.0);
    if dist.dim() <= 2 || min_eigenvalue(&sigma)? >= EPS_PD {
        return Ok(CorrelationMatrix(sigma));
    }
    project_psd(&sigma, EPS_PD)
}

/// Eigenvalue clipping at `floor`, then rescaling to unit diagonal.
///
/// Rescaling can pull the smallest eigenvalue back under the floor; when it
/// does, the result is blended with the identity just enough to restore it.
pub fn project_psd(m: &DMatrix<f64>, floor: f64) -> Result<CorrelationMatrix> {
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(validation("project_psd needs a symmetric matrix"));
    }
    if !(floor > 0.0 && floor < 1.0) {
        return Err(validation(format!("eigenvalue floor {floor} must lie in (0, 1)")));
    }
    let eig = symmetric_eigen(m.clone())?;
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let mut out = unit_diagonal(&rebuilt)?;

    let lowest = min_eigenvalue(&out)?;
    if lowest < floor {
        let t = (floor - lowest) / (1.0 - lowest);
        out = out * (1.0 - t) + DMatrix::identity(m.nrows(), m.nrows()) * t;
        out.fill_diagonal(1.0);
    }
    CorrelationMatrix::new(out)
}

fn unit_diagonal(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let scale: Vec<f64> = m.diagonal().iter().map(|v| 1.0 / v.sqrt()).collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(NptError::Numerical("nonpositive diagonal after projection".into()));
    }
    let mut out = DMatrix::from_fn(d, d, |i, j| m[(i, j)] * scale[i] * scale[j]);
    // exact symmetry and unit diagonal
    for i in 0..d {
        for j in 0..i {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            let avg = avg.clamp(-1.0, 1.0);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    out.fill_diagonal(1.0);
    Ok(out)
}
