use clap::{Parser, Subcommand};
use hyncg_bench::reference::{self, compare_against_reference};
use hyncg_bench::suite::read_rows;
use hyncg_bench::{emit_table, run_suite, selftest, BenchmarkConfig, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hyncg-bench",
    version,
    about = "Run and compare first-order solver benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver in a config on every problem instance.
    Run {
        /// Flat TOML config; defaults apply to missing keys.
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set lambda=0.03` or `--set solvers=GD,HyNCG`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Table printed to stdout.
        #[arg(long, default_value = "markdown")]
        format: Format,
    },
    /// Render a results CSV as a table.
    Table {
        results: PathBuf,
        #[arg(long, default_value = "markdown")]
        format: Format,
    },
    /// Compare a results CSV with the published tables. Exits 1 on any failure.
    Check {
        results: PathBuf,
        /// Reference CSV (table,problem,solver,iterations); the built-in tables by default.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Allowed multiplicative deviation for hinge-loss counts.
        #[arg(long, default_value_t = 2.0)]
        factor: f64,
    },
    /// Run the invariant suite on random quadratics.
    Selftest {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        n: usize,
    },
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.command {
        Command::Run {
            config,
            overrides,
            format,
        } => {
            let mut cfg = match config {
                Some(path) => BenchmarkConfig::load(&path)?,
                None => BenchmarkConfig::default(),
            };
            for o in &overrides {
                cfg.apply_override(o)?;
            }
            cfg.apply_env();
            let rows = run_suite(&cfg)?;
            print!("{}", emit_table(&rows, format));
            eprintln!("results written to {}", cfg.output_dir.display());
            Ok(true)
        }
        Command::Table { results, format } => {
            print!("{}", emit_table(&read_rows(&results)?, format));
            Ok(true)
        }
        Command::Check {
            results,
            reference,
            factor,
        } => {
            let cells = match reference {
                Some(path) => reference::load_reference(&path)?,
                None => reference::parse_reference(reference::BUILTIN)?,
            };
            let report = compare_against_reference(&read_rows(&results)?, &cells, factor)?;
            print!("{}", report.render());
            Ok(report.passed())
        }
        Command::Selftest { count, n } => {
            let report = selftest::run(count, n)?;
            print!("{}", report.render());
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
