//! Closed-form 2-Wasserstein distance between Gaussians and the squared Bures
//! distance between PSD matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{validation, NptError, Result};
use crate::latent::{is_symmetric, symmetric_eigen};

const ASYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_EIG_TOL: f64 = 1e-10;
const NEGATIVE_BURES_TOL: f64 = 1e-8;

/// Mean vector and covariance matrix of a multivariate normal.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianParams {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(validation(format!(
                "covariance is {}x{}, mean has length {d}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        check_psd(&covariance)?;
        Ok(Self { mean, covariance })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.abs().max().max(1.0);
    if !is_symmetric(m, ASYMMETRY_TOL * scale) {
        return Err(validation("matrix is not symmetric"));
    }
    Ok(())
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    check_symmetric(m)?;
    let lowest = symmetric_eigen(m.clone())?.eigenvalues.min();
    if lowest < -NEGATIVE_EIG_TOL {
        return Err(validation(format!("matrix has negative eigenvalue {lowest}")));
    }
    Ok(())
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Principal square root of a symmetric PSD matrix, with eigenvalues that are
/// slightly negative from rounding clipped to zero.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(validation("sqrtm_psd needs a square matrix"));
    }
    check_symmetric(m)?;
    let eig = symmetric_eigen(symmetrized(m))?;
    if eig.eigenvalues.min() < -NEGATIVE_EIG_TOL * m.abs().max().max(1.0) {
        return Err(validation(format!(
            "matrix has negative eigenvalue {}",
            eig.eigenvalues.min()
        )));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(symmetrized(&(v * DMatrix::from_diagonal(&roots) * v.transpose())))
}

/// Sum of square roots of the (clipped) eigenvalues, i.e. `Tr sqrtm(m)`.
fn trace_sqrt(m: &DMatrix<f64>) -> Result<f64> {
    let eig = symmetric_eigen(symmetrized(m))?;
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// `Tr[a + b - 2 (a^1/2 b a^1/2)^1/2]`.
pub fn bures_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    check_same_shape(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let root = sqrtm_psd(a)?;
    check_psd(b)?;
    bures_sq_with_root(a, &root, b)
}

/// Bures term when `sqrtm(a)` is already known.
pub(crate) fn bures_sq_with_root(a: &DMatrix<f64>, a_root: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let inner = a_root * b * a_root;
    let value = a.trace() + b.trace() - 2.0 * trace_sqrt(&inner)?;
    if value < -NEGATIVE_BURES_TOL {
        return Err(NptError::Numerical(format!("squared Bures distance is negative ({value})")));
    }
    Ok(value.max(0.0))
}

fn check_same_shape(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(validation(format!(
            "matrices have incompatible shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Squared 2-Wasserstein distance between two Gaussians.
pub fn gaussian_wasserstein_sq(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(validation(format!(
            "gaussians have dimensions {} and {}",
            a.mean.len(),
            b.mean.len()
        )));
    }
    let location = (&a.mean - &b.mean).norm_squared();
    Ok(location + bures_sq(&a.covariance, &b.covariance)?)
}
