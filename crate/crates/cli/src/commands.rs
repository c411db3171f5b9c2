use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use npt_core::analysis::{bench_metric, parse_metric_list, random_pair, Metric, MetricReport, MetricSpec};
use npt_core::distribution::{load_collection, standardize, ColumnSchema, DistributionCollection, StandardizationParams};
use npt_core::embedding::{classical_mds, procrustes_residual, MdsEmbedding};
use npt_core::matrix::{thread_pool, DistanceMatrix, MatrixTiming};
use npt_core::npt::{load_signatures, npt_matrix_from_signatures, precompute_signatures, save_signatures};
use npt_core::quantile::{QuantileGrid, DEFAULT_GRID_SIZE};
use npt_core::synthetic::{generate_grid, SimulationGrid};
use npt_core::{NptError, Result};
use serde_json::json;

use crate::output::{io_err, write_rows, RunDir};
use crate::{BenchArgs, DistancesArgs, InputArgs, MdsArgs, SimulateArgs};

fn invalid(msg: impl Into<String>) -> NptError {
    NptError::Validation(msg.into())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    if args.rows == 0 || args.cols == 0 {
        return Err(invalid("--rows and --cols must be at least 1"));
    }
    let grid = SimulationGrid::rectangular(args.rows, args.cols, args.n, args.d, args.seed);
    let collection = generate_grid(&grid)?;
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    collection.save_csv(&args.output)?;
    info!("wrote {} distributions to {}", collection.len(), args.output.display());
    Ok(())
}

struct Prepared {
    collection: DistributionCollection,
    standardization: Option<StandardizationParams>,
}

fn schema(args: &InputArgs) -> ColumnSchema {
    ColumnSchema {
        id_column: args.id_column.clone(),
        value_columns: args.value_columns.clone(),
    }
}

fn prepare(path: &Path, args: &InputArgs) -> Result<Prepared> {
    let raw = load_collection(path, &schema(args))?;
    if args.no_standardize {
        return Ok(Prepared {
            collection: raw,
            standardization: None,
        });
    }
    let (collection, params) = standardize(&raw)?;
    Ok(Prepared {
        collection,
        standardization: Some(params),
    })
}

fn quantile_grid(m: Option<usize>, collection: &DistributionCollection) -> Result<QuantileGrid> {
    let m = m.unwrap_or(DEFAULT_GRID_SIZE);
    let smallest = collection.distributions().iter().map(|d| d.n()).min().unwrap_or(0);
    if m > smallest {
        warn!("grid size m = {m} exceeds the smallest sample size {smallest}");
    }
    QuantileGrid::new(m)
}

fn common_config(args: &InputArgs) -> serde_json::Value {
    json!({
        "input": args.input,
        "id_column": args.id_column,
        "value_columns": args.value_columns,
        "metrics": args.metrics,
        "m": args.m.unwrap_or(DEFAULT_GRID_SIZE),
        "workers": args.workers,
        "seed": args.seed,
        "standardize": !args.no_standardize,
    })
}

/// Resolves `--reference` to a metric; without a reference input it must be
/// one of the requested metrics.
fn reference_metric(spec: &str, metrics: &[Metric], seed: u64, separate_input: bool) -> Result<Metric> {
    let parsed: MetricSpec = spec.parse()?;
    let wanted = parsed.metric.with_default_seed(seed, parsed.explicit_seed);
    if separate_input {
        return Ok(wanted);
    }
    metrics
        .iter()
        .find(|m| **m == wanted || m.name() == wanted.name())
        .cloned()
        .ok_or_else(|| invalid(format!("reference metric '{spec}' is not among the requested metrics")))
}

pub fn distances(args: &DistancesArgs) -> Result<()> {
    let common = &args.common;
    let metrics = parse_metric_list(&common.metrics, common.seed)?;
    let reference = args
        .reference
        .as_deref()
        .map(|r| reference_metric(r, &metrics, common.seed, args.reference_input.is_some()))
        .transpose()?;
    let prepared = prepare(&common.input, common)?;
    let collection = &prepared.collection;
    let pool = thread_pool(common.workers)?;
    let mut run = RunDir::create(&common.output_dir)?;

    let cached = args
        .load_signatures
        .as_ref()
        .map(|p| load_signatures(p, args.signature_format.into()))
        .transpose()?;
    let grid = match &cached {
        Some(sigs) => {
            let grid = sigs[0].grid().clone();
            if common.m.is_some_and(|m| m != grid.len()) {
                return Err(invalid(format!(
                    "--m {} conflicts with the cached signatures (m = {})",
                    common.m.unwrap_or_default(),
                    grid.len()
                )));
            }
            let ids: Vec<&str> = sigs.iter().map(|s| s.id()).collect();
            if ids != collection.labels().iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(invalid("cached signature ids do not match the input distributions"));
            }
            grid
        }
        None => quantile_grid(common.m, collection)?,
    };

    let mut matrices: Vec<(Metric, DistanceMatrix)> = Vec::new();
    for metric in &metrics {
        let matrix = match (metric, &cached) {
            (Metric::Npt, Some(sigs)) => pool.install(|| npt_matrix_from_signatures(sigs))?,
            (Metric::Npt, None) if args.save_signatures.is_some() => {
                let start = Instant::now();
                let sigs = pool.install(|| precompute_signatures(collection, &grid))?;
                let precompute = start.elapsed();
                let m = pool.install(|| npt_matrix_from_signatures(&sigs))?;
                if let Some(path) = &args.save_signatures {
                    save_signatures(&sigs, path, args.signature_format.into())?;
                }
                let timing = MatrixTiming {
                    precompute,
                    pairwise: m.timing().pairwise,
                };
                DistanceMatrix::new(m.labels().to_vec(), m.values().clone(), m.metric_name(), timing)?
            }
            _ => pool.install(|| metric.matrix(collection, &grid))?,
        };
        info!("{}: {:.1} ms", metric.name(), matrix.timing().total().as_secs_f64() * 1e3);
        matrix.save_csv(run.file(&format!("{}.csv", metric.name())))?;
        matrices.push((metric.clone(), matrix));
    }

    let mut reference_standardization = None;
    let reference_matrix = match (&reference, &args.reference_input) {
        (Some(metric), Some(path)) => {
            let r = prepare(path, common)?;
            reference_standardization = r.standardization;
            let m = pool.install(|| metric.matrix(&r.collection, &grid))?;
            m.save_csv(run.file(&format!("reference_{}.csv", metric.name())))?;
            Some(m)
        }
        (Some(metric), None) => matrices.iter().find(|(m, _)| m == metric).map(|(_, d)| d.clone()),
        _ => None,
    };

    let mut reports = Vec::new();
    for (metric, matrix) in &matrices {
        let mut report = MetricReport::new(metric, matrix);
        if let Some(r) = &reference_matrix {
            let same = args.reference_input.is_none() && reference.as_ref() == Some(metric);
            if !same {
                report.compare_with(matrix, r)?;
                write_rows(&run.file(&format!("{}_errors.csv", metric.name())), &report.pairwise_errors)?;
            }
        }
        reports.push(report);
    }
    run.write_json(
        "report.json",
        &json!({
            "metrics": reports,
            "reference": reference.as_ref().map(|m| m.to_string()),
            "standardization": prepared.standardization,
            "reference_standardization": reference_standardization,
        }),
    )?;

    let mut config = common_config(common);
    config["reference"] = json!(reference.as_ref().map(|m| m.to_string()));
    config["reference_input"] = json!(args.reference_input);
    config["load_signatures"] = json!(args.load_signatures);
    config["save_signatures"] = json!(args.save_signatures);
    config["metric_configs"] = json!(metrics.iter().map(|m| m.to_string()).collect::<Vec<_>>());
    config["m"] = json!(grid.len());
    run.finish("distances", config)
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    let common = &args.common;
    if args.reps_single == 0 || args.reps_matrix == 0 {
        return Err(invalid("--reps-single and --reps-matrix must be at least 1"));
    }
    let metrics = parse_metric_list(&common.metrics, common.seed)?;
    let prepared = prepare(&common.input, common)?;
    let collection = &prepared.collection;
    let grid = quantile_grid(common.m, collection)?;
    let pool = thread_pool(common.workers)?;
    let pair = random_pair(collection.len(), common.seed)?;
    let mut run = RunDir::create(&common.output_dir)?;

    let rows = metrics
        .iter()
        .map(|metric| {
            let row = pool.install(|| bench_metric(metric, collection, &grid, pair, args.reps_single, args.reps_matrix))?;
            info!("{}: single {:.3} ms, matrix {:.1} ms", row.metric, row.single_mean_ms, row.matrix_mean_ms);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    write_rows(&run.file("bench.csv"), &rows)?;

    let labels = collection.labels();
    let mut config = common_config(common);
    config["reps_single"] = json!(args.reps_single);
    config["reps_matrix"] = json!(args.reps_matrix);
    config["pair"] = json!([labels[pair.0], labels[pair.1]]);
    config["distributions"] = json!(collection.len());
    config["standardization"] = json!(prepared.standardization);
    run.finish("bench", config)
}

/// Covariate column names plus `id -> values` in that column order.
type Covariates = (Vec<String>, HashMap<String, Vec<String>>);

fn read_covariates(path: &Path, id_column: &str) -> Result<Covariates> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let id_pos = headers
        .iter()
        .position(|h| h == id_column)
        .ok_or_else(|| invalid(format!("covariate file has no '{id_column}' column")))?;
    let columns: Vec<String> = headers.iter().enumerate().filter(|(k, _)| *k != id_pos).map(|(_, h)| h.clone()).collect();
    let mut table = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(id_pos).unwrap_or_default().to_owned();
        let values = record.iter().enumerate().filter(|(k, _)| *k != id_pos).map(|(_, v)| v.to_owned()).collect();
        if table.insert(id.clone(), values).is_some() {
            warn!("covariate id '{id}' appears more than once; keeping the last row");
        }
    }
    Ok((columns, table))
}

/// Rows of `embedding` reordered to follow `labels`.
fn reorder(embedding: &MdsEmbedding, labels: &[String]) -> Result<DMatrix<f64>> {
    let index: HashMap<&str, usize> = embedding.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut out = DMatrix::zeros(labels.len(), embedding.dim());
    for (row, label) in labels.iter().enumerate() {
        let i = *index
            .get(label.as_str())
            .ok_or_else(|| invalid(format!("id '{label}' is missing from the alignment matrix")))?;
        out.row_mut(row).copy_from(&embedding.coordinates.row(i));
    }
    Ok(out)
}

pub fn mds(args: &MdsArgs) -> Result<()> {
    let matrix = DistanceMatrix::load_csv(&args.matrix, "input")?;
    let embedding = classical_mds(&matrix, args.r)?;
    if embedding.diagnostics.negative_count > 0 {
        info!(
            "{} negative eigenvalues, negative mass fraction {:.4}",
            embedding.diagnostics.negative_count, embedding.diagnostics.negative_mass_fraction
        );
    }

    let procrustes = match &args.align_to {
        Some(path) => {
            let other = DistanceMatrix::load_csv(path, "align")?;
            if other.len() != matrix.len() {
                return Err(invalid(format!(
                    "alignment matrix has {} distributions, expected {}",
                    other.len(),
                    matrix.len()
                )));
            }
            let other = classical_mds(&other, args.r)?;
            Some(procrustes_residual(&embedding.coordinates, &reorder(&other, &embedding.labels)?)?)
        }
        None => None,
    };

    let (cov_columns, covariates) = match &args.covariates {
        Some(path) => read_covariates(path, &args.covariate_id)?,
        None => (Vec::new(), HashMap::new()),
    };
    let mut missing = Vec::new();
    let mut run = RunDir::create(&args.output_dir)?;
    let path = run.file("embedding.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["id".to_owned()];
    header.extend((1..=args.r).map(|k| format!("coord_{k}")));
    header.extend(cov_columns.iter().cloned());
    w.write_record(&header)?;
    for (i, id) in embedding.labels.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(embedding.coordinates.row(i).iter().map(|v| format!("{v:?}")));
        if args.covariates.is_some() {
            match covariates.get(id) {
                Some(values) => row.extend(values.iter().cloned()),
                None => {
                    warn!("no covariates for id '{id}'");
                    missing.push(id.clone());
                    row.extend(std::iter::repeat_n(String::new(), cov_columns.len()));
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io_err(&path))?;

    run.write_json(
        "embedding.json",
        &json!({
            "r": args.r,
            "eigenvalues": embedding.eigenvalues,
            "diagnostics": embedding.diagnostics,
            "procrustes_residual": procrustes,
            "covariate_misses": missing,
        }),
    )?;
    run.finish(
        "mds",
        json!({
            "matrix": args.matrix,
            "r": args.r,
            "covariates": args.covariates,
            "covariate_id": args.covariate_id,
            "align_to": args.align_to,
        }),
    )
}
