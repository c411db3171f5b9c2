//! Distances between empirical multivariate distributions.
//!
//! The centerpiece is the nonparanormal transport (NPT) distance: a closed
//! form that models each distribution as a Gaussian copula with arbitrary
//! monotone marginals and adds the marginal 1D Wasserstein distances to the
//! Bures distance between latent correlation matrices. Because each
//! distribution reduces to a small [`npt::DistributionSignature`], an
//! `N x N` matrix costs `N` precomputations plus `N^2` cheap comparisons.
//!
//! Also included: exact, sliced and Sinkhorn baselines, a nonparanormal
//! simulator, and classical MDS.
//!
//! ```
//! use npt_core::{distribution::standardize, npt::npt_matrix, quantile::QuantileGrid};
//! use npt_core::synthetic::{generate_grid, SimulationGrid};
//!
//! let collection = generate_grid(&SimulationGrid::rectangular(2, 2, 100, 2, 1)).unwrap();
//! let (standardized, _) = standardize(&collection).unwrap();
//! let grid = QuantileGrid::new(100).unwrap();
//! let matrix = npt_matrix(&standardized, &grid, 1).unwrap();
//! assert_eq!(matrix.len(), 4);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod baselines;
pub mod distribution;
pub mod embedding;
mod error;
pub mod gaussian;
pub mod latent;
pub mod matrix;
pub mod npt;
pub mod quantile;
pub mod synthetic;

pub use error::{ErrorKind, NptError, Result};
