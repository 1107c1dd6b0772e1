//! End-to-end suite runs on small problems: artifacts, accounting and
//! reproducibility.

use hyncg_bench::config::{BenchmarkConfig, ProblemKind, Solver};
use hyncg_bench::suite::{read_rows, run_suite, trace_stem, trace_total};
use hyncg_bench::{compare_against_reference, reference};
use std::path::Path;

fn small_hinge(dir: &Path) -> BenchmarkConfig {
    BenchmarkConfig {
        problem: ProblemKind::HingeLoss,
        m: 2000,
        n: 45,
        lambda: vec![0.3, 0.03],
        solvers: vec![
            Solver::Gd,
            Solver::Ag,
            Solver::Ncg,
            Solver::Hyncg,
            Solver::HyncgGr,
            Solver::HyncgF,
        ],
        output_dir: dir.to_path_buf(),
        ..BenchmarkConfig::default()
    }
}

#[test]
fn writes_results_config_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_hinge(dir.path());
    let rows = run_suite(&config).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows
        .iter()
        .all(|r| !r.dnc && r.final_grad_norm <= config.tol));

    assert_eq!(read_rows(&dir.path().join("results.csv")).unwrap(), rows);
    let saved = BenchmarkConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(saved, config);
    for row in &rows {
        let trace = dir
            .path()
            .join("traces")
            .join(format!("{}.csv", trace_stem(&row.problem, row.solver)));
        assert_eq!(
            trace_total(&trace).unwrap(),
            row.iterations,
            "{} {}",
            row.problem,
            row.solver
        );
    }
}

#[test]
fn potential_never_increases_along_traces() {
    let dir = tempfile::tempdir().unwrap();
    let config = BenchmarkConfig {
        solvers: vec![Solver::Gd, Solver::Hyncg],
        ..small_hinge(dir.path())
    };
    let rows = run_suite(&config).unwrap();
    for row in &rows {
        let path = dir
            .path()
            .join("traces")
            .join(format!("{}.csv", trace_stem(&row.problem, row.solver)));
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let sigma: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap().get(4).unwrap().parse().unwrap())
            .collect();
        assert!(
            sigma.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)),
            "{}",
            path.display()
        );
    }
}

#[test]
fn runs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let strip = |dir: &Path| {
        let mut rows = run_suite(&BenchmarkConfig {
            traces: false,
            ..small_hinge(dir)
        })
        .unwrap();
        rows.iter_mut().for_each(|r| r.wall_ms = 0.0);
        rows
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn scaled_abpdn_run_is_checked_by_status_and_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let config = BenchmarkConfig {
        problem: ProblemKind::Abpdn,
        n: 1024,
        delta: vec![1e-2],
        solvers: vec![Solver::Ncg, Solver::Hyncg],
        tol: 1e-8,
        max_outer: 20_000,
        traces: false,
        output_dir: dir.path().to_path_buf(),
        ..BenchmarkConfig::default()
    };
    let rows = run_suite(&config).unwrap();
    let cells = reference::parse_reference(reference::BUILTIN).unwrap();
    let report = compare_against_reference(&rows, &cells, 2.0).unwrap();
    assert!(report
        .checks
        .iter()
        .any(|c| c.name.contains("(as ABPDN n=65536 delta=1e-2)")));
    assert!(report.checks.iter().all(|c| !c.name.contains("band")));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let config =
            BenchmarkConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        config.validate().unwrap();
        seen += 1;
    }
    assert_eq!(seen, 3);
}
