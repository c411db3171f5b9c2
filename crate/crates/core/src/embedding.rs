//! Classical (Torgerson) multidimensional scaling and orthogonal Procrustes
//! alignment.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{validation, NptError, Result};
use crate::latent::symmetric_eigen;
use crate::matrix::DistanceMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MdsEmbedding {
    pub labels: Vec<String>,
    /// `N x r`, one row per distribution.
    pub coordinates: DMatrix<f64>,
    /// Retained eigenvalues, descending, negatives clipped to zero.
    pub eigenvalues: Vec<f64>,
    pub diagnostics: MdsDiagnostics,
}

/// How far the double-centered matrix is from being positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MdsDiagnostics {
    /// All eigenvalues of the double-centered matrix, descending.
    pub spectrum: Vec<f64>,
    /// Retained eigenvalues that were negative and clipped to zero.
    pub clipped: usize,
    /// Number of negative eigenvalues in the full spectrum.
    pub negative_count: usize,
    /// `sum |negative eigenvalues| / sum |eigenvalues|`.
    pub negative_mass_fraction: f64,
}

impl MdsEmbedding {
    pub fn dim(&self) -> usize {
        self.coordinates.ncols()
    }
}

/// Double centering `B = -1/2 J D J` with `J = I - 11'/N`.
pub fn double_center(squared: &DMatrix<f64>) -> DMatrix<f64> {
    let n = squared.nrows();
    let row_means: Vec<f64> = squared.row_iter().map(|r| r.mean()).collect();
    let col_means: Vec<f64> = squared.column_iter().map(|c| c.mean()).collect();
    let grand = squared.mean();
    DMatrix::from_fn(n, n, |i, j| -0.5 * (squared[(i, j)] - row_means[i] - col_means[j] + grand))
}

pub fn classical_mds(dist: &DistanceMatrix, r: usize) -> Result<MdsEmbedding> {
    let n = dist.len();
    if r == 0 || r >= n {
        return Err(validation(format!("embedding dimension must satisfy 1 <= r < N = {n}, got {r}")));
    }
    let b = double_center(dist.values());
    let b = (&b + b.transpose()) * 0.5;
    let eig = symmetric_eigen(b)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let spectrum: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();

    let top = &spectrum[..r];
    if top.iter().all(|&l| l <= 0.0) {
        return Err(NptError::DegenerateEmbedding(
            "no positive eigenvalue among the leading components".into(),
        ));
    }
    let clipped = top.iter().filter(|&&l| l < 0.0).count();
    let negative_count = spectrum.iter().filter(|&&l| l < 0.0).count();
    let abs_total: f64 = spectrum.iter().map(|l| l.abs()).sum();
    let negative_mass = spectrum.iter().filter(|&&l| l < 0.0).fold(0.0, |acc, l| acc - l);
    let negative_mass_fraction = if abs_total > 0.0 { negative_mass / abs_total } else { 0.0 };
    if clipped > 0 {
        log::warn!("{clipped} of the top {r} MDS eigenvalues are negative and were clipped to zero");
    }

    let eigenvalues: Vec<f64> = top.iter().map(|l| l.max(0.0)).collect();
    let mut coordinates = DMatrix::zeros(n, r);
    for (c, (&k, &lambda)) in order.iter().zip(&eigenvalues).enumerate() {
        let scale = lambda.sqrt();
        let v = eig.eigenvectors.column(k);
        // largest-magnitude entry positive
        let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coordinates[(i, c)] = sign * scale * v[i];
        }
    }

    Ok(MdsEmbedding {
        labels: dist.labels().to_vec(),
        coordinates,
        eigenvalues,
        diagnostics: MdsDiagnostics {
            spectrum,
            clipped,
            negative_count,
            negative_mass_fraction,
        },
    })
}

fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    out
}

/// Frobenius residual after optimally rotating/reflecting `x` onto `y`
/// (both column-centered first, no scaling). Columns are zero-padded to the
/// larger width.
pub fn procrustes_residual(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(validation(format!(
            "procrustes needs matching row counts ({} vs {})",
            x.nrows(),
            y.nrows()
        )));
    }
    let k = x.ncols().max(y.ncols());
    let pad = |m: &DMatrix<f64>| {
        let mut out = DMatrix::zeros(m.nrows(), k);
        out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
        centered(&out)
    };
    let (x, y) = (pad(x), pad(y));
    let svd = (x.transpose() * &y).svd(true, true);
    let (u, v_t) = svd
        .u
        .zip(svd.v_t)
        .ok_or_else(|| NptError::Numerical("SVD failed in procrustes alignment".into()))?;
    let rotation = u * v_t;
    Ok((x * rotation - y).norm())
}
