use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn npt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npt"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("failed to launch npt")
}

fn ok(args: &[&str]) -> Output {
    let out = npt(args);
    assert!(
        out.status.success(),
        "npt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, rows: usize, cols: usize, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    ok(&[
        "simulate",
        "--rows",
        &rows.to_string(),
        "--cols",
        &cols.to_string(),
        "--n",
        &n.to_string(),
        "--d",
        "2",
        "--seed",
        &seed.to_string(),
        "--output",
        s(&path),
    ]);
    path
}

fn read_matrix(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let labels: Vec<String> = rdr.headers().unwrap().iter().skip(1).map(str::to_owned).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    (labels, rows)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_expected_rows_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = simulate(dir.path(), "a.csv", 10, 10, 100, 1);
    let b = simulate(dir.path(), "b.csv", 10, 10, 100, 1);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 10_000 + 1);
    assert_eq!(text.lines().next().unwrap(), "id,x1,x2");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let small = simulate(dir.path(), "small.csv", 2, 2, 5, 1);
    let mut rdr = csv::Reader::from_path(&small).unwrap();
    let mut ids: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_owned()).collect();
    ids.dedup();
    assert_eq!(ids.len(), 4);

    let c = simulate(dir.path(), "c.csv", 10, 10, 100, 2);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn distances_with_reference_emit_matrices_errors_and_report() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 3, 3, 40, 5);
    let out = dir.path().join("run");
    ok(&[
        "distances",
        "--input",
        s(&input),
        "--output-dir",
        s(&out),
        "--metrics",
        "npt,exact,sliced:L=10",
        "--reference",
        "exact",
        "--m",
        "40",
    ]);
    for f in ["npt.csv", "exact.csv", "sliced_L10.csv", "npt_errors.csv", "sliced_L10_errors.csv", "report.json", "manifest.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    assert!(!out.join("exact_errors.csv").exists());

    let (labels, m) = read_matrix(&out.join("npt.csv"));
    assert_eq!(labels.len(), 9);
    for (i, row) in m.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, v) in row.iter().enumerate() {
            assert!((v - m[j][i]).abs() <= 1e-10);
        }
    }

    let errors = fs::read_to_string(out.join("npt_errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 9 * 8 / 2 + 1);

    let report = json(&out.join("report.json"));
    let npt = &report["metrics"][0];
    assert_eq!(npt["metric"], "npt");
    let p = npt["pearson"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&p));
    assert!(npt["spearman"].as_f64().is_some());
    assert!(report["metrics"][1]["pearson"].is_null());
    assert_eq!(report["standardization"]["center"].as_array().unwrap().len(), 2);

    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "distances");
    assert_eq!(manifest["config"]["m"], 40);
    assert_eq!(manifest["config"]["seed"], 0);
}

#[test]
fn npt_only_has_no_concordance() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 2, 2, 30, 3);
    let out = dir.path().join("run");
    ok(&["distances", "--input", s(&input), "--output-dir", s(&out), "--metrics", "npt"]);
    let report = json(&out.join("report.json"));
    assert!(report["metrics"][0]["pearson"].is_null());
    assert!(report["metrics"][0]["pairwise_errors"].as_array().unwrap().is_empty());
}

#[test]
fn matrices_do_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 3, 4, 50, 9);
    let run = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "distances",
            "--input",
            s(&input),
            "--output-dir",
            s(&out),
            "--metrics",
            "npt,sliced:L=8",
            "--workers",
            workers,
            "--seed",
            "4",
        ]);
        out
    };
    let (a, b) = (run("1", "one"), run("3", "three"));
    for f in ["npt.csv", "sliced_L8.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn signature_cache_round_trips_in_both_formats() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 2, 3, 60, 2);
    let fresh = dir.path().join("fresh");
    ok(&["distances", "--input", s(&input), "--output-dir", s(&fresh), "--m", "50"]);
    for (format, name) in [("json", "sigs.json"), ("csv", "sigs")] {
        let cache = dir.path().join(name);
        let saved = dir.path().join(format!("saved_{format}"));
        let loaded = dir.path().join(format!("loaded_{format}"));
        ok(&[
            "distances", "--input", s(&input), "--output-dir", s(&saved), "--m", "50",
            "--save-signatures", s(&cache), "--signature-format", format,
        ]);
        assert!(cache.exists());
        ok(&[
            "distances", "--input", s(&input), "--output-dir", s(&loaded),
            "--load-signatures", s(&cache), "--signature-format", format,
        ]);
        let want = fs::read(fresh.join("npt.csv")).unwrap();
        assert_eq!(fs::read(saved.join("npt.csv")).unwrap(), want);
        assert_eq!(fs::read(loaded.join("npt.csv")).unwrap(), want);
    }
    let cache = dir.path().join("sigs.json");
    let out = npt(&[
        "distances", "--input", s(&input), "--output-dir", s(&dir.path().join("bad")),
        "--load-signatures", s(&cache), "--m", "20",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reference_can_come_from_a_larger_sample() {
    let dir = TempDir::new().unwrap();
    let small = simulate(dir.path(), "small.csv", 2, 3, 30, 8);
    let large = simulate(dir.path(), "large.csv", 2, 3, 90, 8);
    let out = dir.path().join("run");
    ok(&[
        "distances",
        "--input",
        s(&small),
        "--output-dir",
        s(&out),
        "--metrics",
        "npt",
        "--reference",
        "exact",
        "--reference-input",
        s(&large),
        "--m",
        "30",
    ]);
    assert!(out.join("reference_exact.csv").exists());
    let report = json(&out.join("report.json"));
    assert_eq!(report["metrics"][0]["reference"], "exact");
    assert_eq!(report["metrics"][0]["pairwise_errors"].as_array().unwrap().len(), 15);
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 2, 2, 20, 1);
    let out = dir.path().join("run");
    let code = |args: &[&str]| npt(args).status.code();

    assert_eq!(code(&["distances", "--input", s(&input), "--output-dir", s(&out), "--metrics", "bogus"]), Some(2));
    assert_eq!(
        code(&["distances", "--input", s(&input), "--output-dir", s(&out), "--metrics", "npt", "--reference", "exact"]),
        Some(2)
    );
    assert_eq!(
        code(&["distances", "--input", s(&dir.path().join("nope.csv")), "--output-dir", s(&out)]),
        Some(4)
    );

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "id,x1\na,1.0\na,oops\n").unwrap();
    let output = npt(&["distances", "--input", s(&bad), "--output-dir", s(&out)]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("row 3"));

    // a collapsed dimension cannot be standardized
    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "id,x1\na,1.0\na,1.0\nb,1.0\nb,1.0\n").unwrap();
    assert_eq!(code(&["distances", "--input", s(&flat), "--output-dir", s(&out)]), Some(2));

    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "id,a,b,c\na,0,0,0\nb,0,0,0\nc,0,0,0\n").unwrap();
    assert_eq!(
        code(&["mds", "--matrix", s(&zeros), "--r", "1", "--output-dir", s(&dir.path().join("mds"))]),
        Some(3)
    );
}

#[test]
fn bench_writes_one_row_per_metric() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 2, 2, 30, 6);
    let out = dir.path().join("bench");
    ok(&[
        "bench",
        "--input",
        s(&input),
        "--output-dir",
        s(&out),
        "--metrics",
        "npt,exact,sinkhorn:eps=1",
        "--reps-single",
        "3",
        "--reps-matrix",
        "2",
    ]);
    let mut rdr = csv::Reader::from_path(out.join("bench.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert!(headers.iter().any(|h| h == "matrix_mean_ms"));
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][0], "npt");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["config"]["reps_single"], 3);
    assert_eq!(manifest["config"]["reps_matrix"], 2);
    assert_eq!(manifest["config"]["pair"].as_array().unwrap().len(), 2);
}

#[test]
fn mds_joins_covariates_and_reports_alignment() {
    let dir = TempDir::new().unwrap();
    let input = simulate(dir.path(), "data.csv", 2, 5, 40, 11);
    let run = dir.path().join("run");
    ok(&["distances", "--input", s(&input), "--output-dir", s(&run), "--metrics", "npt,exact"]);
    let (labels, _) = read_matrix(&run.join("npt.csv"));
    assert_eq!(labels.len(), 10);

    let cov = dir.path().join("cov.csv");
    let mut text = String::from("id,group,score\n");
    for (k, l) in labels.iter().enumerate().skip(1) {
        text.push_str(&format!("{l},g{},{}\n", k % 2, k));
    }
    fs::write(&cov, text).unwrap();

    let out = dir.path().join("mds");
    ok(&[
        "mds",
        "--matrix",
        s(&run.join("npt.csv")),
        "--r",
        "2",
        "--output-dir",
        s(&out),
        "--covariates",
        s(&cov),
        "--align-to",
        s(&run.join("exact.csv")),
    ]);
    let mut rdr = csv::Reader::from_path(out.join("embedding.csv")).unwrap();
    let headers: Vec<String> = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(headers, ["id", "coord_1", "coord_2", "group", "score"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(&rows[0][3], "");
    assert_eq!(&rows[1][3], "g1");

    let side = json(&out.join("embedding.json"));
    assert_eq!(side["covariate_misses"].as_array().unwrap().len(), 1);
    assert_eq!(side["eigenvalues"].as_array().unwrap().len(), 2);
    assert!(side["procrustes_residual"].as_f64().unwrap() >= 0.0);
    assert!(side["diagnostics"]["negative_mass_fraction"].as_f64().is_some());
}
