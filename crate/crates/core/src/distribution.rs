//! Empirical distributions, CSV ingestion of grouped samples and pooled
//! per-dimension standardization.
//!
//! Standardization centers each dimension at the pooled median and divides by
//! the pooled sample standard deviation (taken about the pooled *mean*, with
//! an `n - 1` denominator). The center and the scale therefore come from
//! different location estimates; this is intentional and matches the
//! published procedure.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{validation, NptError, Result};

/// Samples `n x d` from one distribution. Rows are realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    id: String,
    samples: DMatrix<f64>,
}

impl EmpiricalDistribution {
    pub fn new(id: impl Into<String>, samples: DMatrix<f64>) -> Result<Self> {
        let id = id.into();
        if samples.ncols() == 0 {
            return Err(validation(format!("distribution '{id}' has zero dimensions")));
        }
        if samples.nrows() < 2 {
            return Err(validation(format!(
                "distribution '{id}' has {} realization(s); at least 2 are required",
                samples.nrows()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % samples.nrows(), pos / samples.nrows());
            return Err(validation(format!(
                "distribution '{id}' has a non-finite value at row {row}, dimension {col}"
            )));
        }
        Ok(Self { id, samples })
    }

    /// Builds a distribution from row-major realizations.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let id = id.into();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(validation(format!("distribution '{id}' has ragged rows")));
        }
        let samples = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(id, samples)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    /// The `j`th coordinate of every realization, as a contiguous slice.
    pub fn marginal(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.samples.as_slice()[j * n..(j + 1) * n]
    }

    /// Keeps only the first `n` realizations.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(validation(format!(
                "cannot truncate '{}' to {n} rows; it has {}",
                self.id,
                self.n()
            )));
        }
        Self::new(self.id.clone(), self.samples.rows(0, n).into_owned())
    }

    /// Applies `f` to every entry of marginal `j`.
    pub fn map_marginal(&self, j: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if j >= self.dim() {
            return Err(validation(format!("dimension {j} out of range")));
        }
        let mut samples = self.samples.clone();
        samples.column_mut(j).apply(|v| *v = f(*v));
        Self::new(self.id.clone(), samples)
    }
}

/// An ordered set of distributions sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionCollection {
    distributions: Vec<EmpiricalDistribution>,
    dimension: usize,
    standardized: bool,
}

impl DistributionCollection {
    pub fn new(distributions: Vec<EmpiricalDistribution>) -> Result<Self> {
        let dimension = distributions
            .first()
            .map(EmpiricalDistribution::dim)
            .ok_or_else(|| validation("collection is empty"))?;
        let mut seen = HashMap::new();
        for (i, dist) in distributions.iter().enumerate() {
            if dist.dim() != dimension {
                return Err(validation(format!(
                    "distribution '{}' has dimension {}, expected {dimension}",
                    dist.id(),
                    dist.dim()
                )));
            }
            if seen.insert(dist.id().to_owned(), i).is_some() {
                return Err(validation(format!("duplicate distribution id '{}'", dist.id())));
            }
        }
        Ok(Self {
            distributions,
            dimension,
            standardized: false,
        })
    }

    pub fn distributions(&self) -> &[EmpiricalDistribution] {
        &self.distributions
    }

    pub fn len(&self) -> usize {
        self.distributions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distributions.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn labels(&self) -> Vec<String> {
        self.distributions.iter().map(|d| d.id().to_owned()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&EmpiricalDistribution> {
        self.distributions.iter().find(|d| d.id() == id)
    }

    /// Keeps the first `n` realizations of every member.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let distributions = self
            .distributions
            .iter()
            .map(|d| d.truncated(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            distributions,
            dimension: self.dimension,
            standardized: false,
        })
    }

    /// Pooled values of dimension `j` across all members, in collection order.
    pub fn pooled(&self, j: usize) -> Vec<f64> {
        self.distributions
            .iter()
            .flat_map(|d| d.marginal(j).iter().copied())
            .collect()
    }

    /// Writes the collection in the long ingestion format
    /// (`id,x1,...,xd`, one row per realization).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_owned()];
        header.extend((1..=self.dimension).map(|j| format!("x{j}")));
        out.write_record(&header)?;
        let mut record = Vec::with_capacity(self.dimension + 1);
        for dist in &self.distributions {
            for k in 0..dist.n() {
                record.clear();
                record.push(dist.id().to_owned());
                record.extend(dist.samples().row(k).iter().map(|v| format_float(*v)));
                out.write_record(&record)?;
            }
        }
        out.flush().map_err(|e| NptError::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| NptError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest decimal representation that round-trips through `f64` parsing.
pub(crate) fn format_float(v: f64) -> String {
    format!("{v:?}")
}

/// Which CSV columns hold the group id and the coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub id_column: String,
    /// Coordinate columns, in order. `None` means every column except the id.
    pub value_columns: Option<Vec<String>>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            id_column: "id".to_owned(),
            value_columns: None,
        }
    }
}

pub fn load_collection(path: impl AsRef<Path>, schema: &ColumnSchema) -> Result<DistributionCollection> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| NptError::io(path, e))?;
    read_collection(std::io::BufReader::new(file), schema)
}

/// Groups long-format CSV rows by id. Groups appear in order of first
/// occurrence; row order within a group is preserved.
pub fn read_collection<R: Read>(reader: R, schema: &ColumnSchema) -> Result<DistributionCollection> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| validation(format!("column '{name}' not found in CSV header")))
    };
    let id_idx = find(&schema.id_column)?;
    let value_idx: Vec<usize> = match &schema.value_columns {
        Some(cols) => cols.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..headers.len()).filter(|&i| i != id_idx).collect(),
    };
    if value_idx.is_empty() {
        return Err(validation("no coordinate columns selected"));
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Vec<f64>>> = HashMap::new();
    for (r, record) in rdr.records().enumerate() {
        // header is row 1; data rows start at 2
        let row = r + 2;
        let record = record?;
        let id = record
            .get(id_idx)
            .ok_or_else(|| NptError::Ingestion {
                row,
                column: schema.id_column.clone(),
                message: "missing cell".into(),
            })?
            .trim()
            .to_owned();
        let mut values = Vec::with_capacity(value_idx.len());
        for &c in &value_idx {
            let column = headers.get(c).unwrap_or_default().to_owned();
            let cell = record.get(c).ok_or_else(|| NptError::Ingestion {
                row,
                column: column.clone(),
                message: "missing cell".into(),
            })?;
            let v: f64 = cell.trim().parse().map_err(|_| NptError::Ingestion {
                row,
                column: column.clone(),
                message: format!("cannot parse '{cell}' as a number"),
            })?;
            if !v.is_finite() {
                return Err(NptError::Ingestion {
                    row,
                    column,
                    message: format!("non-finite value '{cell}'"),
                });
            }
            values.push(v);
        }
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id);
                Vec::new()
            })
            .push(values);
    }

    let distributions = order
        .into_iter()
        .map(|id| {
            let rows = groups.remove(&id).unwrap_or_default();
            EmpiricalDistribution::from_rows(id, &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    DistributionCollection::new(distributions)
}

/// Pooled per-dimension center (median) and scale (standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Median of a multiset; even sizes average the two middle order statistics.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    })
}

/// Sample standard deviation about the mean, denominator `n - 1`.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

pub fn compute_standardization(collection: &DistributionCollection) -> Result<StandardizationParams> {
    if collection.is_standardized() {
        log::warn!("computing standardization parameters on an already standardized collection");
    }
    let d = collection.dimension();
    let mut center = Vec::with_capacity(d);
    let mut scale = Vec::with_capacity(d);
    for j in 0..d {
        let pooled = collection.pooled(j);
        let med = median(&pooled).ok_or_else(|| validation("collection is empty"))?;
        let sd = sample_sd(&pooled).ok_or_else(|| validation("pooled sample too small"))?;
        if sd <= 0.0 || !sd.is_finite() {
            return Err(NptError::DegenerateScale { dimension: j });
        }
        center.push(med);
        scale.push(sd);
    }
    Ok(StandardizationParams { center, scale })
}

pub fn apply_standardization(
    collection: &DistributionCollection,
    params: &StandardizationParams,
) -> Result<DistributionCollection> {
    let d = collection.dimension();
    if params.center.len() != d || params.scale.len() != d {
        return Err(validation(format!(
            "standardization parameters have {} / {} entries, collection dimension is {d}",
            params.center.len(),
            params.scale.len()
        )));
    }
    if let Some(j) = params.scale.iter().position(|s| !(*s > 0.0)) {
        return Err(NptError::DegenerateScale { dimension: j });
    }
    let distributions = collection
        .distributions()
        .iter()
        .map(|dist| {
            let mut samples = dist.samples().clone();
            for (j, mut col) in samples.column_iter_mut().enumerate() {
                let (c, s) = (params.center[j], params.scale[j]);
                col.apply(|v| *v = (*v - c) / s);
            }
            EmpiricalDistribution::new(dist.id(), samples)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DistributionCollection {
        distributions,
        dimension: d,
        standardized: true,
    })
}

/// Computes pooled parameters and applies them.
pub fn standardize(collection: &DistributionCollection) -> Result<(DistributionCollection, StandardizationParams)> {
    let params = compute_standardization(collection)?;
    let out = apply_standardization(collection, &params)?;
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(id: &str, xs: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::new(id, DMatrix::from_column_slice(xs.len(), 1, xs)).unwrap()
    }

    #[test]
    fn groups_rows_by_id() {
        let csv = "id,x,y\na,1,2\na,3,4\nb,5,6\nb,7,8\nb,9,10\n";
        let c = read_collection(csv.as_bytes(), &ColumnSchema::default()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.dimension(), 2);
        assert_eq!(c.distributions()[0].n(), 2);
        assert_eq!(c.distributions()[1].n(), 3);
        assert_eq!(c.distributions()[1].marginal(1), &[6.0, 8.0, 10.0]);
    }

    #[test]
    fn single_group_single_column() {
        let csv = "group,v\nonly,1\nonly,2\n";
        let schema = ColumnSchema {
            id_column: "group".into(),
            value_columns: Some(vec!["v".into()]),
        };
        let c = read_collection(csv.as_bytes(), &schema).unwrap();
        assert_eq!((c.len(), c.dimension()), (1, 1));
    }

    #[test]
    fn singleton_group_names_the_id() {
        let csv = "id,x\na,1\na,2\nc,3\n";
        let err = read_collection(csv.as_bytes(), &ColumnSchema::default()).unwrap_err();
        assert!(matches!(err, NptError::Validation(ref m) if m.contains("'c'")), "{err}");
    }

    #[test]
    fn bad_cell_names_row_and_column() {
        let csv = "id,x,y\na,1,2\na,oops,4\n";
        match read_collection(csv.as_bytes(), &ColumnSchema::default()).unwrap_err() {
            NptError::Ingestion { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other}"),
        }
        let csv = "id,x\na,1\na,NaN\n";
        assert!(matches!(
            read_collection(csv.as_bytes(), &ColumnSchema::default()),
            Err(NptError::Ingestion { row: 3, .. })
        ));
    }

    #[test]
    fn duplicate_ids_and_mixed_dimensions_rejected() {
        let a = one_dim("a", &[1.0, 2.0]);
        assert!(DistributionCollection::new(vec![a.clone(), a.clone()]).is_err());
        let b = EmpiricalDistribution::new("b", DMatrix::zeros(3, 2)).unwrap();
        assert!(DistributionCollection::new(vec![a, b]).is_err());
    }

    #[test]
    fn standardization_hand_values() {
        let c = DistributionCollection::new(vec![one_dim("a", &[1.0, 2.0, 3.0])]).unwrap();
        let p = compute_standardization(&c).unwrap();
        assert_eq!(p.center, vec![2.0]);
        assert_eq!(p.scale, vec![1.0]);

        // mean 1, sum of squares 12, 12/3 = 4
        let c = DistributionCollection::new(vec![one_dim("a", &[0.0, 0.0]), one_dim("b", &[0.0, 4.0])]).unwrap();
        let p = compute_standardization(&c).unwrap();
        assert_eq!(p.center, vec![0.0]);
        assert_eq!(p.scale, vec![2.0]);

        let z = apply_standardization(&c, &p).unwrap();
        assert!(z.is_standardized());
        assert_eq!(z.distributions()[1].marginal(0), &[0.0, 2.0]);
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let c = DistributionCollection::new(vec![one_dim("a", &[5.0, 5.0, 5.0])]).unwrap();
        assert!(matches!(
            compute_standardization(&c),
            Err(NptError::DegenerateScale { dimension: 0 })
        ));
    }

    #[test]
    fn center_maps_to_zero() {
        let c = DistributionCollection::new(vec![one_dim("a", &[2.0, 3.0])]).unwrap();
        let p = StandardizationParams {
            center: vec![2.0],
            scale: vec![1.0],
        };
        let z = apply_standardization(&c, &p).unwrap();
        assert_eq!(z.distributions()[0].marginal(0)[0], 0.0);
        let bad = StandardizationParams {
            center: vec![0.0, 0.0],
            scale: vec![1.0, 1.0],
        };
        assert!(apply_standardization(&c, &bad).is_err());
    }

    #[test]
    fn even_median_averages_middle() {
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn csv_round_trip() {
        let a = EmpiricalDistribution::from_rows("a", &[vec![0.1, -2.5], vec![1e-17, 3.0]]).unwrap();
        let b = EmpiricalDistribution::from_rows("b", &[vec![7.0, 8.0], vec![9.0, 10.0], vec![1.0 / 3.0, 2.0]]).unwrap();
        let c = DistributionCollection::new(vec![a, b]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let back = read_collection(buf.as_slice(), &ColumnSchema::default()).unwrap();
        assert_eq!(back, c);
    }
}
