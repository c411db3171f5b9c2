use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use npt_core::distribution::{read_collection, standardize, ColumnSchema, DistributionCollection, EmpiricalDistribution};
use npt_core::gaussian::{gaussian_wasserstein_sq, GaussianParams};
use npt_core::latent::kendall_tau;
use npt_core::matrix::DistanceMatrix;
use npt_core::npt::{npt_breakdown, npt_matrix, npt_sq, precompute_signature};
use npt_core::quantile::{empirical_quantiles, wasserstein1d_sq, QuantileGrid};
use npt_core::synthetic::{generate_grid, sample_npn, NpnSpec, SimulationGrid};

fn grid(m: usize) -> QuantileGrid {
    QuantileGrid::new(m).unwrap()
}

/// Evenly spread normal sample: `mu + sigma * Phi^-1((k - 1/2) / n)`.
fn normal_scores(mu: f64, sigma: f64, n: usize) -> Vec<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    (1..=n).map(|k| mu + sigma * z.inverse_cdf((k as f64 - 0.5) / n as f64)).collect()
}

#[test]
fn one_dimensional_gaussians_match_closed_form() {
    let g = grid(200);
    for &(ma, sa, mb, sb) in &[(0.0, 1.0, 1.0, 1.0), (0.0, 1.0, 0.0, 2.0), (-1.0, 0.5, 2.0, 1.5)] {
        let qa = empirical_quantiles(&normal_scores(ma, sa, 5000), &g).unwrap();
        let qb = empirical_quantiles(&normal_scores(mb, sb, 5000), &g).unwrap();
        let grid_value = wasserstein1d_sq(&qa, &qb, &g).unwrap();
        let a = GaussianParams::new(DVector::from_element(1, ma), DMatrix::from_element(1, 1, sa * sa)).unwrap();
        let b = GaussianParams::new(DVector::from_element(1, mb), DMatrix::from_element(1, 1, sb * sb)).unwrap();
        let closed = gaussian_wasserstein_sq(&a, &b).unwrap();
        assert_relative_eq!(closed, (ma - mb).powi(2) + (sa - sb).powi(2), epsilon = 1e-10);
        assert_relative_eq!(grid_value, closed, max_relative = 0.03);
    }
}

#[test]
fn common_shift_leaves_distance_unchanged() {
    let g = grid(100);
    let a = sample_npn(&NpnSpec { rho: 0.4, lambda: 0.2, d: 3, n: 150, seed: 1 }).unwrap();
    let b = sample_npn(&NpnSpec { rho: -0.3, lambda: 0.7, d: 3, n: 150, seed: 2 }).unwrap();
    let before = npt_sq(&precompute_signature(&a, &g).unwrap(), &precompute_signature(&b, &g).unwrap()).unwrap();
    let shift = |d: &EmpiricalDistribution| {
        let mut s = d.samples().clone();
        for (j, mut col) in s.column_iter_mut().enumerate() {
            col.add_scalar_mut(3.0 - 2.0 * j as f64);
        }
        EmpiricalDistribution::new(d.id(), s).unwrap()
    };
    let after = npt_sq(
        &precompute_signature(&shift(&a), &g).unwrap(),
        &precompute_signature(&shift(&b), &g).unwrap(),
    )
    .unwrap();
    assert_relative_eq!(before, after, max_relative = 1e-10);
}

#[test]
fn pure_location_difference_is_captured_by_marginals_only() {
    let g = grid(100);
    let a = sample_npn(&NpnSpec { rho: 0.5, lambda: 0.0, d: 2, n: 200, seed: 3 }).unwrap();
    let mut moved = a.samples().clone();
    moved.column_mut(0).add_scalar_mut(1.5);
    let b = EmpiricalDistribution::new("moved", moved).unwrap();
    let parts = npt_breakdown(&precompute_signature(&a, &g).unwrap(), &precompute_signature(&b, &g).unwrap()).unwrap();
    assert_eq!(parts.bures, 0.0);
    assert_relative_eq!(parts.marginal[0], 2.25, max_relative = 1e-12);
    assert_eq!(parts.marginal[1], 0.0);
}

#[test]
fn matrix_is_identical_for_any_worker_count() {
    let coll = generate_grid(&SimulationGrid::rectangular(4, 3, 80, 3, 21)).unwrap();
    let (coll, _) = standardize(&coll).unwrap();
    let g = grid(80);
    let one = npt_matrix(&coll, &g, 1).unwrap();
    let four = npt_matrix(&coll, &g, 4).unwrap();
    assert_eq!(one.values(), four.values());
    assert_eq!(one.labels(), four.labels());
}

#[test]
fn standardization_centers_scales_and_keeps_ranks() {
    let coll = generate_grid(&SimulationGrid::rectangular(2, 3, 60, 2, 5)).unwrap();
    let (std_coll, params) = standardize(&coll).unwrap();
    assert!(std_coll.is_standardized() && !coll.is_standardized());
    for j in 0..2 {
        let pooled = std_coll.pooled(j);
        assert!(npt_core::distribution::median(&pooled).unwrap().abs() < 1e-12);
        assert_relative_eq!(npt_core::distribution::sample_sd(&pooled).unwrap(), 1.0, max_relative = 1e-12);
        assert!(params.scale[j] > 0.0);
    }
    for (raw, std) in coll.distributions().iter().zip(std_coll.distributions()) {
        let t0 = kendall_tau(raw.marginal(0), raw.marginal(1)).unwrap();
        let t1 = kendall_tau(std.marginal(0), std.marginal(1)).unwrap();
        assert_eq!(t0, t1);
    }
}

#[test]
fn collection_and_matrix_csv_round_trip() {
    let coll = generate_grid(&SimulationGrid::rectangular(2, 2, 12, 2, 4)).unwrap();
    let mut buf = Vec::new();
    coll.write_csv(&mut buf).unwrap();
    let back: DistributionCollection = read_collection(buf.as_slice(), &ColumnSchema::default()).unwrap();
    assert_eq!(back.labels(), coll.labels());
    for (x, y) in back.distributions().iter().zip(coll.distributions()) {
        assert_eq!(x.samples(), y.samples());
    }

    let m = npt_matrix(&coll, &grid(12), 1).unwrap();
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let back = DistanceMatrix::read_csv(buf.as_slice(), "npt").unwrap();
    assert_eq!(back.values(), m.values());
    assert_eq!(back.labels(), m.labels());
}

#[test]
fn selected_value_columns_are_respected() {
    let text = "sample,extra,id,b,a\n0,9,p,1.0,2.0\n1,9,p,2.0,1.0\n0,9,q,0.5,0.5\n1,9,q,1.5,3.0\n";
    let schema = ColumnSchema {
        id_column: "id".into(),
        value_columns: Some(vec!["a".into(), "b".into()]),
    };
    let coll = read_collection(text.as_bytes(), &schema).unwrap();
    assert_eq!(coll.labels(), ["p", "q"]);
    assert_eq!(coll.dimension(), 2);
    assert_eq!(coll.get("q").unwrap().marginal(0), &[0.5, 3.0]);
    assert_eq!(coll.get("q").unwrap().marginal(1), &[0.5, 1.5]);
}
