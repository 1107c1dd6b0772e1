//! Benchmark harness for the `hyncg` solvers: configuration, suite runs,
//! result tables, reference comparisons and an invariant self-test.

pub mod config;
pub mod reference;
pub mod selftest;
pub mod suite;
pub mod table;

pub use config::{BenchmarkConfig, ProblemKind, Solver};
pub use reference::{compare_against_reference, Report};
pub use suite::{run_cell, run_suite, Instance, ResultRow};
pub use table::{emit_table, Format};
