//! Quantile vectors on a shared probability grid and the squared 1D
//! Wasserstein distance between them.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

pub const DEFAULT_GRID_SIZE: usize = 100;

/// `m` equally spaced probabilities `0 = u_1 < ... < u_m = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct QuantileGrid {
    points: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridSpec {
    m: usize,
}

impl TryFrom<GridSpec> for QuantileGrid {
    type Error = crate::NptError;
    fn try_from(spec: GridSpec) -> Result<Self> {
        QuantileGrid::new(spec.m)
    }
}

impl From<QuantileGrid> for GridSpec {
    fn from(grid: QuantileGrid) -> Self {
        GridSpec { m: grid.len() }
    }
}

impl QuantileGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(validation(format!("quantile grid needs m >= 2, got {m}")));
        }
        let last = (m - 1) as f64;
        let points = (0..m).map(|k| k as f64 / last).collect();
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.len() - 1) as f64
    }
}

/// A marginal quantile function evaluated on a [`QuantileGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantileVector {
    values: Vec<f64>,
}

impl QuantileVector {
    /// Wraps precomputed values; they must be finite and nondecreasing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(validation("quantile vector has non-finite entries"));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(validation("quantile vector is not nondecreasing"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Left-continuous empirical quantiles `inf{x : F_n(x) >= p}` at each grid
/// point, with `p = 0` mapped to the sample minimum.
pub fn empirical_quantiles(samples: &[f64], grid: &QuantileGrid) -> Result<QuantileVector> {
    if samples.is_empty() {
        return Err(validation("cannot take quantiles of an empty sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantiles_of_sorted(&sorted, grid))
}

/// Same as [`empirical_quantiles`] for input that is already sorted.
pub(crate) fn quantiles_of_sorted(sorted: &[f64], grid: &QuantileGrid) -> QuantileVector {
    let n = sorted.len();
    let steps = grid.len() - 1;
    // u_i = i / steps, so the smallest k with k/n >= u_i is ceil(i * n / steps),
    // computed in integers to avoid rounding at exact step boundaries.
    let values = (0..grid.len())
        .map(|i| {
            let k = (i * n).div_ceil(steps);
            sorted[k.max(1) - 1]
        })
        .collect();
    QuantileVector { values }
}

/// Trapezoidal approximation of the integral of the squared quantile gap.
pub fn wasserstein1d_sq(qa: &QuantileVector, qb: &QuantileVector, grid: &QuantileGrid) -> Result<f64> {
    let m = grid.len();
    if qa.len() != m || qb.len() != m {
        return Err(validation(format!(
            "quantile vectors of length {} and {} do not match grid size {m}",
            qa.len(),
            qb.len()
        )));
    }
    Ok(trapezoid_sq_gap(qa.values(), qb.values(), grid.spacing()))
}

#[inline]
pub(crate) fn trapezoid_sq_gap(a: &[f64], b: &[f64], h: f64) -> f64 {
    let m = a.len();
    let sq = |k: usize| {
        let g = a[k] - b[k];
        g * g
    };
    let interior: f64 = (1..m - 1).map(sq).sum();
    h * (interior + 0.5 * (sq(0) + sq(m - 1)))
}

/// Exact squared 2-Wasserstein distance between two equal-size uniform
/// empirical measures, given their sorted supports.
pub fn wasserstein1d_sq_sorted(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(validation(format!(
            "sorted samples have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(validation("sorted samples are empty"));
    }
    if !is_sorted(a) || !is_sorted(b) {
        return Err(validation("samples must be sorted ascending"));
    }
    Ok(sorted_sq_gap(a, b))
}

#[inline]
pub(crate) fn sorted_sq_gap(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / a.len() as f64
}

fn is_sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}
