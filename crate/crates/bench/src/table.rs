//! Rendering result rows as CSV or as a problem-by-solver markdown grid.

use crate::config::Solver;
use crate::suite::ResultRow;
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format {s:?} (csv or markdown)")),
        }
    }
}

pub fn emit_table(rows: &[ResultRow], format: Format) -> String {
    match format {
        Format::Csv => csv_text(rows),
        Format::Markdown => markdown(rows),
    }
}

fn csv_text(rows: &[ResultRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "problem",
            "solver",
            "iterations",
            "dnc",
            "final_grad_norm",
            "final_f",
            "wall_ms",
        ])
        .expect("in-memory write");
    }
    for row in rows {
        w.serialize(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

/// Distinct values in first-seen order.
fn ordered<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

fn cell(row: Option<&ResultRow>) -> String {
    match row {
        None => "".into(),
        Some(r) if r.dnc => "DNC".into(),
        Some(r) => r.iterations.to_string(),
    }
}

fn markdown(rows: &[ResultRow]) -> String {
    let problems = ordered(rows.iter().map(|r| r.problem.clone()));
    let solvers: Vec<Solver> = ordered(rows.iter().map(|r| r.solver));
    let mut out = String::from("| Problem |");
    for s in &solvers {
        write!(out, " {s} |").unwrap();
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(solvers.len()));
    out.push('\n');
    for p in &problems {
        write!(out, "| {p} |").unwrap();
        for s in &solvers {
            let row = rows.iter().find(|r| &r.problem == p && r.solver == *s);
            write!(out, " {} |", cell(row)).unwrap();
        }
        out.push('\n');
    }
    out
}
