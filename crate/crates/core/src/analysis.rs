//! Metric selection, concordance statistics and timing used by the study
//! driver.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::baselines::{exact_ot_sq, sinkhorn_sq, sliced_wasserstein_sq, SinkhornConfig, SlicedConfig};
use crate::distribution::{DistributionCollection, EmpiricalDistribution};
use crate::error::{validation, Result};
use crate::matrix::{assemble_pairwise, DistanceMatrix, MatrixTiming};
use crate::npt::{npt_matrix_in_pool, npt_sq, precompute_signature};
use crate::quantile::QuantileGrid;

/// A distance that can fill a [`DistanceMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Npt,
    Exact,
    Sliced(SlicedConfig),
    Sinkhorn(SinkhornConfig),
}

impl Metric {
    /// Stable name used for file names and report keys.
    pub fn name(&self) -> String {
        match self {
            Metric::Npt => "npt".into(),
            Metric::Exact => "exact".into(),
            Metric::Sliced(c) => format!("sliced_L{}", c.n_slices),
            Metric::Sinkhorn(c) => format!("sinkhorn_eps{}", c.epsilon),
        }
    }

    /// Squared distance between two raw samples (signatures are built on the
    /// fly for NPT).
    pub fn pair(&self, a: &EmpiricalDistribution, b: &EmpiricalDistribution, grid: &QuantileGrid) -> Result<f64> {
        match self {
            Metric::Npt => npt_sq(&precompute_signature(a, grid)?, &precompute_signature(b, grid)?),
            Metric::Exact => exact_ot_sq(a, b),
            Metric::Sliced(c) => sliced_wasserstein_sq(a, b, c),
            Metric::Sinkhorn(c) => sinkhorn_sq(a, b, c),
        }
    }

    /// Full matrix on the current rayon pool.
    pub fn matrix(&self, collection: &DistributionCollection, grid: &QuantileGrid) -> Result<DistanceMatrix> {
        if collection.len() < 2 {
            return Err(validation("a distance matrix needs at least 2 distributions"));
        }
        if let Metric::Npt = self {
            return npt_matrix_in_pool(collection, grid);
        }
        let labels = collection.labels();
        let start = Instant::now();
        let values = assemble_pairwise(collection.distributions(), &labels, |a, b| self.pair(a, b, grid))?;
        let timing = MatrixTiming {
            precompute: Duration::ZERO,
            pairwise: start.elapsed(),
        };
        DistanceMatrix::new(labels, values, self.name(), timing)
    }

    /// Sets the seed of seeded metrics.
    pub fn with_default_seed(mut self, seed: u64, explicit: bool) -> Self {
        if let Metric::Sliced(c) = &mut self {
            if !explicit {
                c.seed = seed;
            }
        }
        self
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Npt => write!(f, "npt"),
            Metric::Exact => write!(f, "exact"),
            Metric::Sliced(c) => write!(f, "sliced:L={}:seed={}:rescale={}", c.n_slices, c.seed, c.rescale_by_d),
            Metric::Sinkhorn(c) => write!(
                f,
                "sinkhorn:eps={}:iters={}:tol={}",
                c.epsilon, c.max_iters, c.tolerance
            ),
        }
    }
}

/// A parsed metric plus whether the spec pinned its own seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub metric: Metric,
    pub explicit_seed: bool,
}

impl FromStr for MetricSpec {
    type Err = crate::NptError;

    /// `npt`, `exact`, `sliced[:L=10][:seed=1][:rescale=true]`,
    /// `sinkhorn[:eps=0.1][:iters=10000][:tol=1e-9]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default().to_ascii_lowercase();
        let options: Vec<(String, String)> = parts
            .map(|p| {
                p.split_once('=')
                    .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim().to_owned()))
                    .ok_or_else(|| validation(format!("metric option '{p}' is not key=value")))
            })
            .collect::<Result<_>>()?;
        let bad = |k: &str, v: &str| validation(format!("invalid value '{v}' for option '{k}' of metric '{name}'"));
        let mut explicit_seed = false;
        let metric = match name.as_str() {
            "npt" | "exact" if !options.is_empty() => {
                return Err(validation(format!("metric '{name}' takes no options")));
            }
            "npt" => Metric::Npt,
            "exact" | "wasserstein" => Metric::Exact,
            "sliced" => {
                let mut c = SlicedConfig::default();
                for (k, v) in &options {
                    match k.as_str() {
                        "l" | "slices" => c.n_slices = v.parse().map_err(|_| bad(k, v))?,
                        "seed" => {
                            c.seed = v.parse().map_err(|_| bad(k, v))?;
                            explicit_seed = true;
                        }
                        "rescale" => c.rescale_by_d = v.parse().map_err(|_| bad(k, v))?,
                        _ => return Err(validation(format!("unknown option '{k}' for metric 'sliced'"))),
                    }
                }
                if c.n_slices == 0 {
                    return Err(bad("L", "0"));
                }
                Metric::Sliced(c)
            }
            "sinkhorn" => {
                let mut c = SinkhornConfig::default();
                for (k, v) in &options {
                    match k.as_str() {
                        "eps" | "epsilon" => c.epsilon = v.parse().map_err(|_| bad(k, v))?,
                        "iters" | "max_iters" => c.max_iters = v.parse().map_err(|_| bad(k, v))?,
                        "tol" | "tolerance" => c.tolerance = v.parse().map_err(|_| bad(k, v))?,
                        _ => return Err(validation(format!("unknown option '{k}' for metric 'sinkhorn'"))),
                    }
                }
                if !(c.epsilon > 0.0) || c.max_iters == 0 || !(c.tolerance > 0.0) {
                    return Err(validation(format!("invalid sinkhorn configuration in '{s}'")));
                }
                Metric::Sinkhorn(c)
            }
            other => return Err(validation(format!("unknown metric '{other}'"))),
        };
        Ok(MetricSpec { metric, explicit_seed })
    }
}

/// Parses a comma-separated metric list.
pub fn parse_metric_list(list: &str, default_seed: u64) -> Result<Vec<Metric>> {
    let metrics: Vec<Metric> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let spec: MetricSpec = s.parse()?;
            Ok(spec.metric.with_default_seed(default_seed, spec.explicit_seed))
        })
        .collect::<Result<_>>()?;
    if metrics.is_empty() {
        return Err(validation("at least one metric is required"));
    }
    Ok(metrics)
}

// ---------------------------------------------------------------------------
// concordance

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Ranks starting at 1, ties get their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let rank = 0.5 * ((start + 1) + end) as f64;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn median_abs(values: &[f64]) -> Option<f64> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    crate::distribution::median(&abs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairError {
    pub left: String,
    pub right: String,
    pub reference: f64,
    pub value: f64,
    /// `reference - value`, both squared distances.
    pub error: f64,
}

/// Timing and agreement of one metric's matrix against a reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub config: String,
    pub single_pair_times_ms: Vec<f64>,
    pub matrix_time_ms: f64,
    pub precompute_time_ms: f64,
    pub pairwise_time_ms: f64,
    pub reference: Option<String>,
    pub pairwise_errors: Vec<PairError>,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
    pub median_abs_error: Option<f64>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl MetricReport {
    pub fn new(metric: &Metric, matrix: &DistanceMatrix) -> Self {
        let t = matrix.timing();
        Self {
            metric: metric.name(),
            config: metric.to_string(),
            single_pair_times_ms: Vec::new(),
            matrix_time_ms: ms(t.total()),
            precompute_time_ms: ms(t.precompute),
            pairwise_time_ms: ms(t.pairwise),
            reference: None,
            pairwise_errors: Vec::new(),
            pearson: None,
            spearman: None,
            median_abs_error: None,
        }
    }

    /// Fills error and concordance fields against `reference`, matching
    /// distributions by id.
    pub fn compare_with(&mut self, matrix: &DistanceMatrix, reference: &DistanceMatrix) -> Result<()> {
        let errors = pairwise_errors(matrix, reference)?;
        let refs: Vec<f64> = errors.iter().map(|e| e.reference).collect();
        let vals: Vec<f64> = errors.iter().map(|e| e.value).collect();
        let diffs: Vec<f64> = errors.iter().map(|e| e.error).collect();
        self.pearson = pearson(&refs, &vals);
        self.spearman = spearman(&refs, &vals);
        self.median_abs_error = median_abs(&diffs);
        self.reference = Some(reference.metric_name().to_owned());
        self.pairwise_errors = errors;
        Ok(())
    }
}

/// `reference - value` for every unordered pair, in the candidate's
/// upper-triangle order.
pub fn pairwise_errors(matrix: &DistanceMatrix, reference: &DistanceMatrix) -> Result<Vec<PairError>> {
    let index: std::collections::HashMap<&str, usize> =
        reference.labels().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| validation(format!("distribution '{id}' is missing from the reference matrix")))
    };
    if reference.len() != matrix.len() {
        return Err(validation(format!(
            "reference has {} distributions, candidate has {}",
            reference.len(),
            matrix.len()
        )));
    }
    matrix
        .upper_triangle()
        .into_iter()
        .map(|((i, j), value)| {
            let (left, right) = (&matrix.labels()[i], &matrix.labels()[j]);
            let r = reference.get(lookup(left)?, lookup(right)?);
            Ok(PairError {
                left: left.clone(),
                right: right.clone(),
                reference: r,
                value,
                error: r - value,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// benchmarking

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub metric: String,
    pub config: String,
    pub single_mean_ms: f64,
    pub single_sd_ms: f64,
    pub matrix_mean_ms: f64,
    pub matrix_sd_ms: f64,
    pub matrix_median_ms: f64,
    pub reps_single: usize,
    pub reps_matrix: usize,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = crate::distribution::sample_sd(values).unwrap_or(0.0);
    (mean, sd)
}

/// A fixed random pair of distinct indices.
pub fn random_pair(len: usize, seed: u64) -> Result<(usize, usize)> {
    if len < 2 {
        return Err(validation("need at least 2 distributions to pick a pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let i = rng.random_range(0..len);
    let mut j = rng.random_range(0..len - 1);
    if j >= i {
        j += 1;
    }
    Ok((i, j))
}

/// Times `reps_single` single-pair evaluations on `pair` and `reps_matrix`
/// full matrices, on the current rayon pool.
pub fn bench_metric(
    metric: &Metric,
    collection: &DistributionCollection,
    grid: &QuantileGrid,
    pair: (usize, usize),
    reps_single: usize,
    reps_matrix: usize,
) -> Result<BenchRow> {
    if reps_single == 0 || reps_matrix == 0 {
        return Err(validation("benchmark repetitions must be at least 1"));
    }
    let (a, b) = (&collection.distributions()[pair.0], &collection.distributions()[pair.1]);
    let mut single = Vec::with_capacity(reps_single);
    for _ in 0..reps_single {
        let start = Instant::now();
        std::hint::black_box(metric.pair(a, b, grid)?);
        single.push(ms(start.elapsed()));
    }
    let mut matrix = Vec::with_capacity(reps_matrix);
    for _ in 0..reps_matrix {
        let m = metric.matrix(collection, grid)?;
        matrix.push(ms(m.timing().total()));
    }
    let (single_mean_ms, single_sd_ms) = mean_sd(&single);
    let (matrix_mean_ms, matrix_sd_ms) = mean_sd(&matrix);
    Ok(BenchRow {
        metric: metric.name(),
        config: metric.to_string(),
        single_mean_ms,
        single_sd_ms,
        matrix_mean_ms,
        matrix_sd_ms,
        matrix_median_ms: crate::distribution::median(&matrix).unwrap_or(f64::NAN),
        reps_single,
        reps_matrix,
    })
}
