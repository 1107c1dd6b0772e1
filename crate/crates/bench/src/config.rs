//! Benchmark configuration: a flat TOML file plus command-line overrides.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "HYNCG_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown solver {0:?} (expected one of GD, AG, CG, NCG, HyNCG, HyNCG/gr, HyNCG/f)")]
    UnknownSolver(String),
    #[error("unknown problem {0:?} (expected abpdn, hinge_loss or quadratic)")]
    UnknownProblem(String),
    #[error("bad override {0:?}: {1}")]
    Override(String, String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProblemKind {
    Abpdn,
    HingeLoss,
    Quadratic,
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Abpdn => "abpdn",
            Self::HingeLoss => "hinge_loss",
            Self::Quadratic => "quadratic",
        }
    }
}

impl TryFrom<String> for ProblemKind {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProblemKind> for String {
    fn from(p: ProblemKind) -> Self {
        p.name().to_string()
    }
}

impl FromStr for ProblemKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "abpdn" => Ok(Self::Abpdn),
            "hinge_loss" | "hinge" | "hl" => Ok(Self::HingeLoss),
            "quadratic" => Ok(Self::Quadratic),
            _ => Err(ConfigError::UnknownProblem(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Solver {
    Gd,
    Ag,
    Cg,
    Ncg,
    Hyncg,
    HyncgGr,
    HyncgF,
}

impl Solver {
    pub const ALL: [Solver; 7] = [
        Solver::Gd,
        Solver::Ag,
        Solver::Cg,
        Solver::Ncg,
        Solver::Hyncg,
        Solver::HyncgGr,
        Solver::HyncgF,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Gd => "GD",
            Solver::Ag => "AG",
            Solver::Cg => "CG",
            Solver::Ncg => "NCG",
            Solver::Hyncg => "HyNCG",
            Solver::HyncgGr => "HyNCG/gr",
            Solver::HyncgF => "HyNCG/f",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ConfigError::UnknownSolver(s.to_string()))
    }
}

impl TryFrom<String> for Solver {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Solver> for String {
    fn from(s: Solver) -> Self {
        s.name().to_string()
    }
}

/// One benchmark suite. Every listed solver runs on every problem instance;
/// `delta` and `lambda` may list several values, one instance each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub problem: ProblemKind,
    /// Unknowns (ABPDN: a power of 4; hinge loss: columns; quadratic: size).
    pub n: usize,
    /// Hinge loss: number of data points.
    pub m: usize,
    /// ABPDN smoothing parameters.
    pub delta: Vec<f64>,
    /// Hinge-loss regularization weights.
    pub lambda: Vec<f64>,
    /// Weight of the smoothed l1 term in ABPDN.
    pub abpdn_lambda: f64,
    pub noise_sigma: f64,
    /// Quadratic: condition number.
    pub kappa: f64,
    pub seed: u64,
    pub solvers: Vec<Solver>,
    pub tol: f64,
    pub max_outer: usize,
    pub ls_tol: f64,
    pub max_inner: usize,
    pub output_dir: PathBuf,
    /// Write one trace CSV per run.
    pub traces: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::HingeLoss,
            n: 141,
            m: 20_000,
            delta: vec![1e-2],
            lambda: vec![0.3],
            abpdn_lambda: 1e-3,
            noise_sigma: 0.4,
            kappa: 100.0,
            seed: 1,
            solvers: vec![Solver::Gd, Solver::Ag, Solver::Ncg, Solver::Hyncg],
            tol: 1e-6,
            max_outer: 100_000,
            ls_tol: 1e-8,
            max_inner: 100,
            output_dir: PathBuf::from("bench-out"),
            traces: true,
        }
    }
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.into(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies a `key=value` override, with `value` in TOML syntax or a bare
    /// string (`solvers=GD,HyNCG` is accepted as a list).
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::Override(assignment.to_string(), msg);
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| bad("expected key=value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let mut table = toml::Table::try_from(&*self).map_err(|e| bad(e.to_string()))?;
        if !table.contains_key(key) {
            return Err(bad(format!("unknown key {key:?}")));
        }
        let list_key = matches!(key, "delta" | "lambda" | "solvers");
        let parsed = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
            Ok(mut t) => t.remove("v").expect("key v"),
            Err(_) => toml::Value::String(value.to_string()),
        };
        let parsed = match parsed {
            toml::Value::String(s) if list_key => toml::Value::Array(
                s.split(',')
                    .map(|p| toml::Value::String(p.trim().to_string()))
                    .collect(),
            ),
            v @ (toml::Value::Float(_) | toml::Value::Integer(_)) if list_key => {
                toml::Value::Array(vec![v])
            }
            v => v,
        };
        table.insert(key.to_string(), parsed);
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
        Ok(())
    }

    /// Replaces `output_dir` with `$HYNCG_OUTPUT_DIR` when set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.solvers.is_empty() {
            return fail("no solvers listed");
        }
        if !(self.tol > 0.0) || !(self.ls_tol > 0.0) {
            return fail("tol and ls_tol must be positive");
        }
        if self.max_outer == 0 || self.max_inner < 2 {
            return fail("max_outer must be at least 1 and max_inner at least 2");
        }
        if self.n == 0 {
            return fail("n must be positive");
        }
        match self.problem {
            ProblemKind::Abpdn if self.delta.is_empty() => fail("abpdn needs at least one delta"),
            ProblemKind::Abpdn if !(self.abpdn_lambda > 0.0) => {
                fail("abpdn_lambda must be positive")
            }
            ProblemKind::HingeLoss if self.lambda.is_empty() || self.m == 0 => {
                fail("hinge_loss needs m and a lambda")
            }
            ProblemKind::Quadratic if !(self.kappa >= 1.0) => fail("kappa must be at least 1"),
            _ if self.solvers.contains(&Solver::Cg) && self.problem != ProblemKind::Quadratic => {
                fail("CG runs only on quadratic problems")
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let c = BenchmarkConfig::from_toml(
            "problem = \"abpdn\"\nn = 4096\ndelta = [1e-2, 1e-3]\nsolvers = [\"GD\", \"hyncg/gr\"]\ntol = 1e-8\n",
        )
        .unwrap();
        assert_eq!(c.problem, ProblemKind::Abpdn);
        assert_eq!(c.delta, vec![1e-2, 1e-3]);
        assert_eq!(c.solvers, vec![Solver::Gd, Solver::HyncgGr]);
        assert_eq!(c.max_outer, 100_000);
        c.validate().unwrap();
    }

    #[test]
    fn overrides() {
        let mut c = BenchmarkConfig::default();
        c.apply_override("solvers=GD,HyNCG/f").unwrap();
        c.apply_override("lambda=0.03").unwrap();
        c.apply_override("tol = 1e-4").unwrap();
        c.apply_override("problem=abpdn").unwrap();
        assert_eq!(c.solvers, vec![Solver::Gd, Solver::HyncgF]);
        assert_eq!(c.lambda, vec![0.03]);
        assert_eq!(c.tol, 1e-4);
        assert_eq!(c.problem, ProblemKind::Abpdn);
        assert!(c.apply_override("nope=1").is_err());
        assert!(c.apply_override("solvers=BFGS").is_err());
    }

    #[test]
    fn roundtrip() {
        let c = BenchmarkConfig::default();
        assert_eq!(BenchmarkConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_empty_solver_list() {
        let c = BenchmarkConfig {
            solvers: vec![],
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }
}
