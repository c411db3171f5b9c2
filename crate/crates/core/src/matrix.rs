//! Square matrices of squared distances and their parallel assembly.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Duration;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::distribution::format_float;
use crate::error::{validation, NptError, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Wall-clock time spent building a matrix, split into the per-distribution
/// precompute phase and the pairwise phase.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MatrixTiming {
    pub precompute: Duration,
    pub pairwise: Duration,
}

impl MatrixTiming {
    pub fn total(&self) -> Duration {
        self.precompute + self.pairwise
    }
}

/// `N x N` symmetric matrix of squared distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: DMatrix<f64>,
    metric_name: String,
    timing: MatrixTiming,
}

impl DistanceMatrix {
    pub fn new(
        labels: Vec<String>,
        values: DMatrix<f64>,
        metric_name: impl Into<String>,
        timing: MatrixTiming,
    ) -> Result<Self> {
        let n = labels.len();
        if values.shape() != (n, n) {
            return Err(validation(format!(
                "distance matrix is {:?} but there are {n} labels",
                values.shape()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(validation(format!("diagonal entry {i} is {}", values[(i, i)])));
            }
            for j in 0..n {
                let v = values[(i, j)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(validation(format!("entry ({i}, {j}) = {v} is not a finite nonnegative value")));
                }
                if (v - values[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(validation(format!("entries ({i}, {j}) and ({j}, {i}) differ")));
                }
            }
        }
        Ok(Self {
            labels,
            values,
            metric_name: metric_name.into(),
            timing,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn metric_name(&self) -> &str {
        &self.metric_name
    }

    pub fn timing(&self) -> MatrixTiming {
        self.timing
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Strict upper triangle in row-major order, paired with `(i, j)`.
    pub fn upper_triangle(&self) -> Vec<((usize, usize), f64)> {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| ((i, j), self.values[(i, j)]))
            .collect()
    }

    /// Square CSV with a header row of ids and the id as first column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec![String::from("id")];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.values.row(i).iter().map(|v| format_float(*v)));
            out.write_record(&row)?;
        }
        out.flush().map_err(|e| NptError::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| NptError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(reader: R, metric_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_owned()).collect();
        let n = labels.len();
        let mut values = DMatrix::zeros(n, n);
        let mut rows = 0;
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if i >= n {
                return Err(validation(format!("matrix has more than {n} rows")));
            }
            if record.get(0).map(str::trim) != Some(labels[i].as_str()) {
                return Err(validation(format!(
                    "row {} is labelled '{}', expected '{}'",
                    i + 1,
                    record.get(0).unwrap_or_default(),
                    labels[i]
                )));
            }
            if record.len() != n + 1 {
                return Err(validation(format!("row {} has {} cells, expected {}", i + 1, record.len(), n + 1)));
            }
            for j in 0..n {
                let cell = &record[j + 1];
                values[(i, j)] = cell.trim().parse().map_err(|_| NptError::Ingestion {
                    row: i + 2,
                    column: labels[j].clone(),
                    message: format!("cannot parse '{cell}' as a number"),
                })?;
            }
            rows += 1;
        }
        if rows != n {
            return Err(validation(format!("matrix has {rows} rows, expected {n}")));
        }
        Self::new(labels, values, metric_name, MatrixTiming::default())
    }

    pub fn load_csv(path: impl AsRef<Path>, metric_name: &str) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| NptError::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), metric_name)
    }
}

/// Builds a thread pool with `workers` threads (0 means rayon's default).
pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| validation(format!("cannot start {workers} worker threads: {e}")))
}

/// Fills the strict upper triangle with `f(items[i], items[j])`, rows in
/// parallel, then mirrors it. Each cell is computed by exactly one call, so
/// the result does not depend on the number of threads.
///
/// Must be called inside the pool that should run it.
pub fn assemble_pairwise<T, F>(items: &[T], labels: &[String], f: F) -> Result<DMatrix<f64>>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    let n = items.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    f(&items[i], &items[j]).map_err(|e| NptError::Pair {
                        left: labels[i].clone(),
                        right: labels[j].clone(),
                        source: Box::new(e),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(values)
}
