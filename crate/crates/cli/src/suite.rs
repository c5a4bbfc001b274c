//! Benchmark suites: a list of cases, each one config run under one or more
//! solvers. Failures are recorded per row and the suite carries on.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use wflo_core::evaluation::{compare, RunRecord};
use wflo_core::mrf::QipModel;
use wflo_core::pipeline::{solve_qip, SolverKind};

use crate::config::{Overrides, RunConfig};

pub const DEFAULT_CUTOFF_SECONDS: f64 = 3600.0;

pub const RECONSTRUCTED_ROSE_NOTE: &str = "the bundled 36-direction rose has reconstructed probabilities; \
     expected powers may sit a few percent away from reference values";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    /// Rows of this solver give each case its percent and time-ratio columns.
    pub baseline: Option<SolverKind>,
    /// Default per-case cut-off.
    pub cutoff_seconds: Option<f64>,
    #[serde(default, rename = "case")]
    pub cases: Vec<Case>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Case {
    pub label: String,
    /// Relative to the suite file.
    pub config: PathBuf,
    pub turbines: Option<usize>,
    pub solvers: Vec<SolverKind>,
    pub cutoff_seconds: Option<f64>,
    /// Expected power to compare against, kW.
    pub reference_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub case: String,
    pub solver: SolverKind,
    pub config: String,
    pub cells: Option<usize>,
    pub rose_states: Option<usize>,
    pub turbines: Option<usize>,
    pub expected_power_kw: Option<f64>,
    pub aep_kwh: Option<f64>,
    pub surrogate_energy: Option<f64>,
    pub matrix_seconds: Option<f64>,
    pub solve_seconds: Option<f64>,
    pub wall_time_s: Option<f64>,
    pub cutoff_seconds: f64,
    pub reference_kw: Option<f64>,
    pub pct_vs_reference: Option<f64>,
    pub pct_vs_baseline: Option<f64>,
    /// Baseline wall time over this row's wall time.
    pub time_ratio_vs_baseline: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub notes: Vec<String>,
    pub rows: Vec<Row>,
}

impl Suite {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading suite {}", path.display()))?;
        let mut suite: Suite = toml::from_str(&text).with_context(|| format!("parsing suite {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for c in &mut suite.cases {
            if c.config.is_relative() {
                c.config = base.join(&c.config);
            }
        }
        Ok(suite)
    }
}

pub fn run_suite(suite: &Suite, name: &str, overrides: &Overrides) -> SuiteReport {
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for case in &suite.cases {
        let cutoff = overrides
            .cutoff_seconds
            .or(case.cutoff_seconds)
            .or(suite.cutoff_seconds)
            .unwrap_or(DEFAULT_CUTOFF_SECONDS);
        let start = rows.len();
        match prepare(case, cutoff, overrides) {
            Ok((cfg, qip, instance, matrix_seconds)) => {
                if cfg.uses_reconstructed_rose() && !notes.iter().any(|n| n == RECONSTRUCTED_ROSE_NOTE) {
                    notes.push(RECONSTRUCTED_ROSE_NOTE.to_string());
                }
                for &solver in &case.solvers {
                    let mut row = blank_row(case, solver, cutoff);
                    row.cells = Some(instance.grid.len());
                    row.rose_states = Some(instance.rose.len());
                    row.turbines = Some(instance.k);
                    let outcome = cfg.pipeline().and_then(|mut p| {
                        p.solver = solver;
                        Ok(solve_qip(&qip, &instance, &p)?)
                    });
                    match outcome {
                        Ok(out) => {
                            let power = out.evaluation.expected_power;
                            row.expected_power_kw = Some(power);
                            row.aep_kwh = Some(out.evaluation.aep);
                            row.surrogate_energy = Some(out.surrogate_energy);
                            row.matrix_seconds = Some(matrix_seconds);
                            row.solve_seconds = Some(out.solve_seconds);
                            row.wall_time_s = Some(matrix_seconds + out.solve_seconds);
                            row.pct_vs_reference = case.reference_kw.map(|r| 100.0 * (power - r) / r);
                        }
                        Err(e) => row.error = Some(format!("{e:#}")),
                    }
                    rows.push(row);
                }
            }
            Err(e) => {
                for &solver in &case.solvers {
                    let mut row = blank_row(case, solver, cutoff);
                    row.error = Some(format!("{e:#}"));
                    rows.push(row);
                }
            }
        }
        if let Some(b) = suite.baseline {
            fill_baseline(&mut rows[start..], b);
        }
    }
    SuiteReport {
        suite: name.to_string(),
        notes,
        rows,
    }
}

fn prepare(
    case: &Case,
    cutoff: f64,
    overrides: &Overrides,
) -> Result<(RunConfig, QipModel, wflo_core::pipeline::Instance, f64)> {
    let mut cfg = RunConfig::load(&case.config)?;
    cfg.apply(&Overrides {
        turbines: case.turbines,
        cutoff_seconds: Some(cutoff),
        ..overrides.clone()
    });
    cfg.pipeline()?;
    let instance = cfg.instance()?;
    let t0 = Instant::now();
    let w = instance.interaction_matrix();
    let matrix_seconds = t0.elapsed().as_secs_f64();
    let qip = QipModel::new(w, instance.k, instance.exclusions.clone())?;
    Ok((cfg, qip, instance, matrix_seconds))
}

fn blank_row(case: &Case, solver: SolverKind, cutoff: f64) -> Row {
    Row {
        case: case.label.clone(),
        solver,
        config: case.config.display().to_string(),
        cells: None,
        rose_states: None,
        turbines: case.turbines,
        expected_power_kw: None,
        aep_kwh: None,
        surrogate_energy: None,
        matrix_seconds: None,
        solve_seconds: None,
        wall_time_s: None,
        cutoff_seconds: cutoff,
        reference_kw: case.reference_kw,
        pct_vs_reference: None,
        pct_vs_baseline: None,
        time_ratio_vs_baseline: None,
        error: None,
    }
}

fn record(row: &Row) -> Option<RunRecord> {
    Some(RunRecord {
        label: format!("{}/{}", row.case, row.solver),
        expected_power: row.expected_power_kw?,
        wall_time: row.wall_time_s?,
    })
}

fn fill_baseline(rows: &mut [Row], baseline: SolverKind) {
    let Some(base) = rows.iter().find(|r| r.solver == baseline).and_then(record) else {
        return;
    };
    for row in rows.iter_mut() {
        if let Some(c) = record(row).and_then(|r| compare(&r, &base).ok()) {
            row.pct_vs_baseline = Some(c.percent_difference);
            row.time_ratio_vs_baseline = Some(c.time_ratio);
        }
    }
}

pub fn write_reports(report: &SuiteReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join("results.csv");
    let mut w = csv::Writer::from_path(&csv_path).with_context(|| format!("writing {}", csv_path.display()))?;
    if report.rows.is_empty() {
        w.write_record(HEADER)?;
    }
    for row in &report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    let json_path = dir.join("results.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(report)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok((csv_path, json_path))
}

const HEADER: [&str; 18] = [
    "case",
    "solver",
    "config",
    "cells",
    "rose_states",
    "turbines",
    "expected_power_kw",
    "aep_kwh",
    "surrogate_energy",
    "matrix_seconds",
    "solve_seconds",
    "wall_time_s",
    "cutoff_seconds",
    "reference_kw",
    "pct_vs_reference",
    "pct_vs_baseline",
    "time_ratio_vs_baseline",
    "error",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_row_fields() {
        let row = Row {
            case: "c".into(),
            solver: SolverKind::Mp,
            config: "x".into(),
            cells: None,
            rose_states: None,
            turbines: None,
            expected_power_kw: None,
            aep_kwh: None,
            surrogate_energy: None,
            matrix_seconds: None,
            solve_seconds: None,
            wall_time_s: None,
            cutoff_seconds: 1.0,
            reference_kw: None,
            pct_vs_reference: None,
            pct_vs_baseline: None,
            time_ratio_vs_baseline: None,
            error: None,
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.serialize(&row).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    }

    #[test]
    fn missing_config_becomes_error_rows() {
        let suite = Suite {
            baseline: Some(SolverKind::Local),
            cutoff_seconds: Some(5.0),
            cases: vec![Case {
                label: "gone".into(),
                config: PathBuf::from("/nonexistent/wflo.toml"),
                turbines: Some(3),
                solvers: vec![SolverKind::Mp, SolverKind::Local],
                cutoff_seconds: None,
                reference_kw: None,
            }],
        };
        let r = run_suite(&suite, "t", &Overrides::default());
        assert_eq!(r.rows.len(), 2);
        assert!(r
            .rows
            .iter()
            .all(|row| row.error.as_deref().unwrap().contains("/nonexistent/wflo.toml")));
        assert_eq!(r.rows[0].cutoff_seconds, 5.0);
    }

    #[test]
    fn empty_suite_parses() {
        let s: Suite = toml::from_str("").unwrap();
        assert!(s.cases.is_empty());
        assert!(run_suite(&s, "empty", &Overrides::default()).rows.is_empty());
    }
}
