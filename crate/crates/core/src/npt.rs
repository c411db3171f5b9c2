//! The nonparanormal transport (NPT) distance.
//!
//! The squared NPT distance between two distributions is the sum of the
//! squared 1D Wasserstein distances between matching marginals plus the
//! squared Bures distance between their latent correlation matrices.
//!
//! Everything that depends on the raw samples lives in a
//! [`DistributionSignature`]: `d` quantile vectors and the latent correlation
//! (with its square root cached). Building a matrix is then two phases:
//! one signature per distribution, followed by `O(m d + d^3)` work per pair
//! that never touches the samples again.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{format_float, DistributionCollection, EmpiricalDistribution};
use crate::error::{validation, NptError, Result};
use crate::gaussian::{bures_sq_with_root, sqrtm_psd};
use crate::latent::{estimate_latent_correlation, CorrelationMatrix};
use crate::matrix::{assemble_pairwise, thread_pool, DistanceMatrix, MatrixTiming};
use crate::quantile::{empirical_quantiles, trapezoid_sq_gap, QuantileGrid, QuantileVector};

pub const METRIC_NAME: &str = "npt";

/// Per-distribution state needed by [`npt_sq`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSignature {
    id: String,
    grid: QuantileGrid,
    quantiles: Vec<QuantileVector>,
    latent: CorrelationMatrix,
    latent_root: DMatrix<f64>,
}

impl DistributionSignature {
    pub fn new(
        id: impl Into<String>,
        grid: QuantileGrid,
        quantiles: Vec<QuantileVector>,
        latent: CorrelationMatrix,
    ) -> Result<Self> {
        let id = id.into();
        if quantiles.len() != latent.dim() {
            return Err(validation(format!(
                "signature '{id}' has {} quantile vectors but a {}x{} latent matrix",
                quantiles.len(),
                latent.dim(),
                latent.dim()
            )));
        }
        if let Some(q) = quantiles.iter().find(|q| q.len() != grid.len()) {
            return Err(validation(format!(
                "signature '{id}' has a quantile vector of length {} on a grid of size {}",
                q.len(),
                grid.len()
            )));
        }
        let latent_root = sqrtm_psd(latent.matrix())?;
        Ok(Self {
            id,
            grid,
            quantiles,
            latent,
            latent_root,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn grid(&self) -> &QuantileGrid {
        &self.grid
    }

    pub fn quantiles(&self) -> &[QuantileVector] {
        &self.quantiles
    }

    pub fn latent(&self) -> &CorrelationMatrix {
        &self.latent
    }

    pub fn dim(&self) -> usize {
        self.quantiles.len()
    }
}

pub fn precompute_signature(dist: &EmpiricalDistribution, grid: &QuantileGrid) -> Result<DistributionSignature> {
    let quantiles = (0..dist.dim())
        .map(|j| empirical_quantiles(dist.marginal(j), grid))
        .collect::<Result<Vec<_>>>()?;
    let latent = estimate_latent_correlation(dist)?;
    DistributionSignature::new(dist.id(), grid.clone(), quantiles, latent)
}

/// The two parts of a squared NPT distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NptBreakdown {
    /// Squared 1D Wasserstein distance per marginal.
    pub marginal: Vec<f64>,
    /// Squared Bures distance between the latent correlation matrices.
    pub bures: f64,
}

impl NptBreakdown {
    pub fn marginal_total(&self) -> f64 {
        self.marginal.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.marginal_total() + self.bures
    }
}

fn check_compatible(a: &DistributionSignature, b: &DistributionSignature) -> Result<()> {
    if a.grid != b.grid {
        return Err(validation(format!(
            "signatures '{}' and '{}' use different quantile grids ({} vs {})",
            a.id,
            b.id,
            a.grid.len(),
            b.grid.len()
        )));
    }
    if a.dim() != b.dim() {
        return Err(validation(format!(
            "signatures '{}' and '{}' have dimensions {} and {}",
            a.id,
            b.id,
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

pub fn npt_breakdown(a: &DistributionSignature, b: &DistributionSignature) -> Result<NptBreakdown> {
    check_compatible(a, b)?;
    let h = a.grid.spacing();
    let marginal = a
        .quantiles
        .iter()
        .zip(&b.quantiles)
        .map(|(qa, qb)| trapezoid_sq_gap(qa.values(), qb.values(), h))
        .collect();
    let bures = bures_sq_with_root(a.latent.matrix(), &a.latent_root, b.latent.matrix())?;
    Ok(NptBreakdown { marginal, bures })
}

/// Squared NPT distance between two precomputed signatures.
pub fn npt_sq(a: &DistributionSignature, b: &DistributionSignature) -> Result<f64> {
    check_compatible(a, b)?;
    let h = a.grid.spacing();
    let marginal: f64 = a
        .quantiles
        .iter()
        .zip(&b.quantiles)
        .map(|(qa, qb)| trapezoid_sq_gap(qa.values(), qb.values(), h))
        .sum();
    let bures = bures_sq_with_root(a.latent.matrix(), &a.latent_root, b.latent.matrix())?;
    Ok(marginal + bures)
}

/// Phase 1: one signature per distribution, in parallel on the current pool.
pub fn precompute_signatures(
    collection: &DistributionCollection,
    grid: &QuantileGrid,
) -> Result<Vec<DistributionSignature>> {
    collection
        .distributions()
        .par_iter()
        .map(|d| precompute_signature(d, grid))
        .collect()
}

/// Phase 2 over already computed signatures. Timing covers the pairwise
/// phase only.
pub fn npt_matrix_from_signatures(signatures: &[DistributionSignature]) -> Result<DistanceMatrix> {
    let labels: Vec<String> = signatures.iter().map(|s| s.id.clone()).collect();
    let start = Instant::now();
    let values = assemble_pairwise(signatures, &labels, npt_sq)?;
    let timing = MatrixTiming {
        precompute: Default::default(),
        pairwise: start.elapsed(),
    };
    DistanceMatrix::new(labels, values, METRIC_NAME, timing)
}

/// Full NPT distance matrix, both phases run on `workers` threads
/// (0 = all available cores).
pub fn npt_matrix(collection: &DistributionCollection, grid: &QuantileGrid, workers: usize) -> Result<DistanceMatrix> {
    let pool = thread_pool(workers)?;
    pool.install(|| npt_matrix_in_pool(collection, grid))
}

/// [`npt_matrix`] on the caller's current rayon pool.
pub fn npt_matrix_in_pool(collection: &DistributionCollection, grid: &QuantileGrid) -> Result<DistanceMatrix> {
    if collection.len() < 2 {
        return Err(validation("a distance matrix needs at least 2 distributions"));
    }
    if !collection.is_standardized() {
        log::warn!("computing NPT distances on an unstandardized collection");
    }
    let start = Instant::now();
    let signatures = precompute_signatures(collection, grid)?;
    let precompute = start.elapsed();
    let m = npt_matrix_from_signatures(&signatures)?;
    let timing = MatrixTiming {
        precompute,
        pairwise: m.timing().pairwise,
    };
    DistanceMatrix::new(m.labels().to_vec(), m.values().clone(), METRIC_NAME, timing)
}

// ---------------------------------------------------------------------------
// signature cache

#[derive(Serialize, Deserialize)]
struct SignatureRecord {
    id: String,
    quantiles: Vec<QuantileVector>,
    latent: CorrelationMatrix,
}

#[derive(Serialize, Deserialize)]
struct SignatureDocument {
    grid: QuantileGrid,
    signatures: Vec<SignatureRecord>,
}

/// On-disk layout for cached signatures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignatureFormat {
    /// One JSON document holding the grid and every signature.
    Json,
    /// A directory with `quantiles.csv` (`id,dim,q1..qm`) and
    /// `latent.csv` (`id,row,c1..cd`).
    CsvBundle,
}

fn shared_grid(signatures: &[DistributionSignature]) -> Result<QuantileGrid> {
    let grid = signatures
        .first()
        .map(|s| s.grid.clone())
        .ok_or_else(|| validation("no signatures to save"))?;
    if signatures.iter().any(|s| s.grid != grid) {
        return Err(validation("signatures use different quantile grids"));
    }
    Ok(grid)
}

pub fn write_signatures_json<W: Write>(signatures: &[DistributionSignature], writer: W) -> Result<()> {
    let doc = SignatureDocument {
        grid: shared_grid(signatures)?,
        signatures: signatures
            .iter()
            .map(|s| SignatureRecord {
                id: s.id.clone(),
                quantiles: s.quantiles.clone(),
                latent: s.latent.clone(),
            })
            .collect(),
    };
    serde_json::to_writer(writer, &doc)?;
    Ok(())
}

pub fn read_signatures_json<R: Read>(reader: R) -> Result<Vec<DistributionSignature>> {
    let doc: SignatureDocument = serde_json::from_reader(reader)?;
    doc.signatures
        .into_iter()
        .map(|r| {
            let quantiles = r
                .quantiles
                .into_iter()
                .map(|q| QuantileVector::new(q.values().to_vec()))
                .collect::<Result<Vec<_>>>()?;
            DistributionSignature::new(r.id, doc.grid.clone(), quantiles, r.latent)
        })
        .collect()
}

pub fn save_signatures(signatures: &[DistributionSignature], path: impl AsRef<Path>, format: SignatureFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        SignatureFormat::Json => {
            let file = std::fs::File::create(path).map_err(|e| NptError::io(path, e))?;
            write_signatures_json(signatures, std::io::BufWriter::new(file))
        }
        SignatureFormat::CsvBundle => {
            shared_grid(signatures)?;
            std::fs::create_dir_all(path).map_err(|e| NptError::io(path, e))?;
            let mut q = csv::Writer::from_path(path.join("quantiles.csv"))?;
            let m = signatures[0].grid.len();
            let mut header = vec!["id".to_owned(), "dim".to_owned()];
            header.extend((1..=m).map(|k| format!("q{k}")));
            q.write_record(&header)?;
            for s in signatures {
                for (j, qv) in s.quantiles.iter().enumerate() {
                    let mut row = vec![s.id.clone(), j.to_string()];
                    row.extend(qv.values().iter().map(|v| format_float(*v)));
                    q.write_record(&row)?;
                }
            }
            q.flush().map_err(|e| NptError::io(path, e))?;

            let mut l = csv::Writer::from_path(path.join("latent.csv"))?;
            let d = signatures[0].dim();
            let mut header = vec!["id".to_owned(), "row".to_owned()];
            header.extend((1..=d).map(|k| format!("c{k}")));
            l.write_record(&header)?;
            for s in signatures {
                for (r, values) in s.latent.matrix().row_iter().enumerate() {
                    let mut row = vec![s.id.clone(), r.to_string()];
                    row.extend(values.iter().map(|v| format_float(*v)));
                    l.write_record(&row)?;
                }
            }
            l.flush().map_err(|e| NptError::io(path, e))?;
            Ok(())
        }
    }
}

pub fn load_signatures(path: impl AsRef<Path>, format: SignatureFormat) -> Result<Vec<DistributionSignature>> {
    let path = path.as_ref();
    match format {
        SignatureFormat::Json => {
            let file = std::fs::File::open(path).map_err(|e| NptError::io(path, e))?;
            read_signatures_json(std::io::BufReader::new(file))
        }
        SignatureFormat::CsvBundle => {
            let quantile_rows = read_keyed_rows(&path.join("quantiles.csv"))?;
            let latent_rows = read_keyed_rows(&path.join("latent.csv"))?;
            let m = quantile_rows
                .first()
                .map(|(_, _, v)| v.len())
                .ok_or_else(|| validation("empty quantile table"))?;
            let grid = QuantileGrid::new(m)?;
            let mut out: Vec<DistributionSignature> = Vec::new();
            let mut ids: Vec<String> = Vec::new();
            for (id, _, _) in &quantile_rows {
                if !ids.contains(id) {
                    ids.push(id.clone());
                }
            }
            for id in ids {
                let mut qs: Vec<(usize, Vec<f64>)> = quantile_rows
                    .iter()
                    .filter(|(i, _, _)| *i == id)
                    .map(|(_, j, v)| (*j, v.clone()))
                    .collect();
                qs.sort_by_key(|(j, _)| *j);
                let mut ls: Vec<(usize, Vec<f64>)> = latent_rows
                    .iter()
                    .filter(|(i, _, _)| *i == id)
                    .map(|(_, r, v)| (*r, v.clone()))
                    .collect();
                ls.sort_by_key(|(r, _)| *r);
                let d = qs.len();
                if ls.len() != d || ls.iter().any(|(_, v)| v.len() != d) {
                    return Err(validation(format!("latent rows for '{id}' do not form a {d}x{d} matrix")));
                }
                let latent = CorrelationMatrix::new(DMatrix::from_fn(d, d, |i, j| ls[i].1[j]))?;
                let quantiles = qs
                    .into_iter()
                    .map(|(_, v)| QuantileVector::new(v))
                    .collect::<Result<Vec<_>>>()?;
                out.push(DistributionSignature::new(id, grid.clone(), quantiles, latent)?);
            }
            Ok(out)
        }
    }
}

fn read_keyed_rows(path: &Path) -> Result<Vec<(String, usize, Vec<f64>)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        let bad = |column: &str, message: String| NptError::Ingestion {
            row,
            column: column.to_owned(),
            message,
        };
        let id = record.get(0).ok_or_else(|| bad("id", "missing".into()))?.to_owned();
        let index: usize = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("index", "not an integer".into()))?;
        let values = record
            .iter()
            .skip(2)
            .map(|c| c.trim().parse::<f64>().map_err(|_| bad("value", format!("cannot parse '{c}'"))))
            .collect::<Result<Vec<_>>>()?;
        out.push((id, index, values));
    }
    Ok(out)
}
