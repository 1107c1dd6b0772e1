//! Builds problem instances, runs solvers on them and writes the artifacts.

use crate::config::{BenchmarkConfig, ConfigError, ProblemKind, Solver};
use hyncg::problems::{
    Abpdn, HingeData, HingeLoss, Objective, ProblemError, Quadratic, ScreenedHinge,
};
use hyncg::solvers::{self, Criterion};
use hyncg::{IterationRecord, SolveResult, SolverError, SolverOptions};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build {label}: {source}")]
    Problem { label: String, source: ProblemError },
    #[error("{solver} on {label}: {source}")]
    Solver {
        label: String,
        solver: Solver,
        source: SolverError,
    },
    #[error("{solver} needs a quadratic problem, got {label}")]
    Unsupported { label: String, solver: Solver },
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
}

/// One (problem, solver) cell of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub problem: String,
    pub solver: Solver,
    /// Total cost under the per-method accounting.
    pub iterations: usize,
    /// Set iff the outer cap was reached before the tolerance.
    pub dnc: bool,
    pub final_grad_norm: f64,
    pub final_f: f64,
    pub wall_ms: f64,
}

/// A constructed problem with its table label.
pub enum Instance {
    Abpdn(Abpdn),
    Hinge(HingeLoss),
    Quadratic(Quadratic),
}

impl Instance {
    pub fn label(&self) -> String {
        match self {
            Instance::Abpdn(p) => abpdn_label(p.dim(), p.delta()),
            Instance::Hinge(p) => hinge_label(p.data().rows(), p.dim(), p.lambda()),
            Instance::Quadratic(p) => {
                format!("QUAD n={} kappa={:.0}", p.dim(), p.big_l() / p.ell())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Instance::Abpdn(p) => p.dim(),
            Instance::Hinge(p) => p.dim(),
            Instance::Quadratic(p) => p.dim(),
        }
    }
}

pub fn abpdn_label(n: usize, delta: f64) -> String {
    format!("ABPDN n={n} delta={delta:e}")
}

pub fn hinge_label(m: usize, n: usize, lambda: f64) -> String {
    format!("HL m={m} n={n} lambda={lambda}")
}

/// Every instance the config describes, in config order.
pub fn build_instances(config: &BenchmarkConfig) -> Result<Vec<Instance>, SuiteError> {
    let wrap = |label: String| move |source| SuiteError::Problem { label, source };
    match config.problem {
        ProblemKind::Abpdn => config
            .delta
            .iter()
            .map(|&d| {
                Abpdn::with_lambda(config.n, d, config.abpdn_lambda)
                    .map(Instance::Abpdn)
                    .map_err(wrap(abpdn_label(config.n, d)))
            })
            .collect(),
        ProblemKind::HingeLoss => {
            let data = HingeData::generate(config.m, config.n, config.noise_sigma, config.seed)
                .map_err(wrap(format!("HL m={} n={}", config.m, config.n)))?;
            let data = Arc::new(data);
            config
                .lambda
                .iter()
                .map(|&l| {
                    HingeLoss::new(Arc::clone(&data), l)
                        .map(Instance::Hinge)
                        .map_err(wrap(hinge_label(config.m, config.n, l)))
                })
                .collect()
        }
        ProblemKind::Quadratic => Quadratic::random_spd(config.n, config.kappa, config.seed)
            .map(|q| vec![Instance::Quadratic(q)])
            .map_err(wrap(format!("QUAD n={} kappa={}", config.n, config.kappa))),
    }
}

pub fn solver_options(config: &BenchmarkConfig) -> SolverOptions {
    SolverOptions {
        tol: config.tol,
        max_outer: config.max_outer,
        ls_tol: config.ls_tol,
        max_inner: config.max_inner,
        keep_iterates: false,
    }
}

fn dispatch<P: Objective + ?Sized>(
    problem: &P,
    solver: Solver,
    x0: &[f64],
    options: &SolverOptions,
) -> Option<Result<SolveResult, SolverError>> {
    Some(match solver {
        Solver::Gd => solvers::gd_run(problem, x0, options),
        Solver::Ag => solvers::ag_run(problem, x0, options),
        Solver::Ncg => solvers::ncg_run(problem, x0, options),
        Solver::Hyncg => solvers::hyncg_run(problem, x0, options),
        Solver::HyncgGr => solvers::hyncg_variant_run(problem, x0, options, Criterion::GradNorm),
        Solver::HyncgF => solvers::hyncg_variant_run(problem, x0, options, Criterion::FValue),
        Solver::Cg => return None,
    })
}

/// Runs one solver from the origin.
pub fn run_cell(
    instance: &Instance,
    solver: Solver,
    options: &SolverOptions,
) -> Result<(ResultRow, SolveResult), SuiteError> {
    let label = instance.label();
    let x0 = vec![0.0; instance.dim()];
    let start = Instant::now();
    let outcome = match instance {
        Instance::Abpdn(p) => dispatch(p, solver, &x0, options),
        Instance::Hinge(p) => dispatch(&ScreenedHinge::new(p), solver, &x0, options),
        Instance::Quadratic(p) if solver == Solver::Cg => Some(solvers::cg_run(p, &x0, options)),
        Instance::Quadratic(p) => dispatch(p, solver, &x0, options),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let result = outcome
        .ok_or_else(|| SuiteError::Unsupported {
            label: label.clone(),
            solver,
        })?
        .map_err(|source| SuiteError::Solver {
            label: label.clone(),
            solver,
            source,
        })?;
    log::info!(
        "{label} {solver}: {} iterations ({} outer), |grad f| = {:.3e}, {wall_ms:.0} ms",
        result.iterations,
        result.outer_iterations,
        result.grad_norm
    );
    let row = ResultRow {
        problem: label,
        solver,
        iterations: result.iterations,
        dnc: !result.converged,
        final_grad_norm: result.grad_norm,
        final_f: result.f,
        wall_ms,
    };
    Ok((row, result))
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    index: usize,
    kind: String,
    f: f64,
    grad_norm: f64,
    sigma_sq: Option<f64>,
    inner: usize,
    cumulative: usize,
}

/// File-name stem for a (problem, solver) cell.
pub fn trace_stem(problem: &str, solver: Solver) -> String {
    let clean = |s: &str| {
        s.chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect::<String>()
    };
    format!("{}__{}", clean(problem), clean(solver.name()))
}

pub fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<(), SuiteError> {
    let csv_err = |source| SuiteError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in trace {
        w.serialize(TraceRow {
            index: r.index,
            kind: r.kind.as_str().to_string(),
            f: r.f,
            grad_norm: r.grad_norm,
            sigma_sq: r.sigma_sq,
            inner: r.inner,
            cumulative: r.cumulative,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| SuiteError::Io {
        path: path.into(),
        source,
    })
}

/// Sum of the `inner` column of a trace file.
pub fn trace_total(path: &Path) -> Result<usize, SuiteError> {
    let csv_err = |source| SuiteError::Csv {
        path: path.into(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut total = 0;
    for row in r.deserialize::<TraceRow>() {
        total += row.map_err(csv_err)?.inner;
    }
    Ok(total)
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), SuiteError> {
    let csv_err = |source| SuiteError::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| SuiteError::Io {
        path: path.into(),
        source,
    })
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, SuiteError> {
    let csv_err = |source| SuiteError::Csv {
        path: path.into(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

/// Runs every solver on every instance, writing `config.toml`, `results.csv`
/// and (when enabled) one trace per run under `config.output_dir`. Rows come
/// back ordered by problem, then solver in config order.
pub fn run_suite(config: &BenchmarkConfig) -> Result<Vec<ResultRow>, SuiteError> {
    config.validate()?;
    let dir = &config.output_dir;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| SuiteError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, config.to_toml()).map_err(io_err(&config_path))?;
    let trace_dir = dir.join("traces");
    if config.traces {
        std::fs::create_dir_all(&trace_dir).map_err(io_err(&trace_dir))?;
    }
    let options = solver_options(config);
    let mut rows = Vec::new();
    for instance in build_instances(config)? {
        for &solver in &config.solvers {
            let (row, result) = run_cell(&instance, solver, &options)?;
            if config.traces {
                write_trace(
                    &trace_dir.join(format!("{}.csv", trace_stem(&row.problem, solver))),
                    &result.trace,
                )?;
            }
            rows.push(row);
        }
    }
    write_rows(&dir.join("results.csv"), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(abpdn_label(65536, 1e-2), "ABPDN n=65536 delta=1e-2");
        assert_eq!(
            hinge_label(200000, 447, 0.003),
            "HL m=200000 n=447 lambda=0.003"
        );
        assert_eq!(
            trace_stem("HL m=20 n=3 lambda=0.3", Solver::HyncgGr),
            "hl_m_20_n_3_lambda_0.3__hyncg_gr"
        );
    }

    #[test]
    fn cg_rejected_off_quadratics() {
        let p = Abpdn::new(16, 1e-2).unwrap();
        let err = run_cell(&Instance::Abpdn(p), Solver::Cg, &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, SuiteError::Unsupported { .. }));
    }
}
