use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wflo_core::decode::read_layout_csv;
use wflo_core::farm::make_square_grid;
use wflo_core::wake::InteractionMatrix;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn wflo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wflo"))
        .args(args)
        .current_dir(repo())
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, body).unwrap();
    p
}

const GRID: &str = "[grid]\narea_side_m = 2000.0\ncells_per_side = 10\n";

#[test]
fn wr1_matrix_is_one_sided() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&wflo(&[
        "matrix",
        "--config",
        "configs/wr1_100.toml",
        "--out",
        s(tmp.path()),
    ]));
    let w = InteractionMatrix::read_csv(std::fs::File::open(tmp.path().join("matrix.csv")).unwrap(), "matrix").unwrap();
    assert_eq!(w.n(), 100);
    assert!(w.nonzero_count() > 0);
    for i in 0..100 {
        for j in 0..100 {
            if i != j {
                assert_eq!(w.get(i, j) * w.get(j, i), 0.0, "pair ({i}, {j})");
            }
        }
    }
}

#[test]
fn uniform_rose_matrix_is_symmetric() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&wflo(&[
        "matrix",
        "--config",
        "configs/uniform36_100.toml",
        "--out",
        s(tmp.path()),
    ]));
    let w = InteractionMatrix::read_csv(std::fs::File::open(tmp.path().join("matrix.csv")).unwrap(), "matrix").unwrap();
    assert!(w.max_asymmetry() < 1e-12);
}

#[test]
fn missing_rose_file_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("[rose]\nfile = \"no_such_rose.csv\"\n{GRID}"));
    let out = wflo(&["matrix", "--config", s(&cfg), "--out", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_rose.csv"));
    assert!(!tmp.path().join("matrix.csv").exists());
}

#[test]
fn rose_file_is_read_relative_to_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("rose.csv"),
        "speed_ms,direction_deg,probability\n12.0,0.0,1.0\n",
    )
    .unwrap();
    let cfg = write_config(tmp.path(), &format!("[rose]\nfile = \"rose.csv\"\n{GRID}"));
    ok(&wflo(&["matrix", "--config", s(&cfg), "--out", s(tmp.path())]));
    assert!(tmp.path().join("matrix.csv").exists());
}

fn solve(solver: &str, turbines: &str, dir: &Path) -> serde_json::Value {
    ok(&wflo(&[
        "solve",
        "--config",
        "configs/wr1_100.toml",
        "--solver",
        solver,
        "--turbines",
        turbines,
        "--out",
        s(dir),
    ]));
    json(&dir.join("report.json"))
}

#[test]
fn local_search_matches_the_reference_power() {
    let tmp = tempfile::tempdir().unwrap();
    let report = solve("local", "30", tmp.path());
    let p = report["evaluation"]["expected_power"].as_f64().unwrap();
    assert!((p - 14410.0).abs() / 14410.0 <= 0.005, "{p}");
    assert_eq!(report["config"]["solver"]["kind"], "local");
    assert_eq!(report["config"]["grid"]["cells_per_side"], 10);
    let layout = read_layout_csv(
        std::fs::File::open(tmp.path().join("layout.csv")).unwrap(),
        "layout",
        &make_square_grid(2000.0, 10).unwrap(),
    )
    .unwrap();
    assert_eq!(layout.count(), 30);
    let listed: Vec<usize> = report["layout"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap() as usize)
        .collect();
    assert_eq!(listed, layout.selected());
}

#[test]
fn message_passing_reaches_the_quality_floor() {
    let tmp = tempfile::tempdir().unwrap();
    let report = solve("mp", "30", tmp.path());
    let p = report["evaluation"]["expected_power"].as_f64().unwrap();
    assert!(p >= 13970.0, "{p}");
    let mp = &report["message_passing"];
    assert!(mp["beta"].as_f64().unwrap() > 0.0);
    let trace = mp["solve_report"]["lower_bound_trace"].as_array().unwrap();
    assert!(!trace.is_empty());
    if mp["clusters"].as_u64().unwrap() > 0 {
        let dump = std::fs::read_to_string(tmp.path().join("clusters.txt")).unwrap();
        assert_eq!(dump.lines().count() as u64, mp["clusters"].as_u64().unwrap());
        assert!(dump.lines().all(|l| l.starts_with("c ") && l.split(' ').count() == 4));
    }
}

#[test]
fn zero_turbines_give_an_empty_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let report = solve("mp", "0", tmp.path());
    assert_eq!(report["evaluation"]["aep"].as_f64().unwrap(), 0.0);
    assert_eq!(report["layout"].as_array().unwrap().len(), 0);
    let csv = std::fs::read_to_string(tmp.path().join("layout.csv")).unwrap();
    assert_eq!(csv.trim(), "cell_index,x_m,y_m");
}

#[test]
fn solves_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for solver in ["local", "greedy"] {
        solve(solver, "12", a.path());
        solve(solver, "12", b.path());
        assert_eq!(
            std::fs::read(a.path().join("layout.csv")).unwrap(),
            std::fs::read(b.path().join("layout.csv")).unwrap()
        );
    }
}

#[test]
fn infeasible_budget_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = wflo(&[
        "solve",
        "--config",
        "configs/wr1_100.toml",
        "--turbines",
        "101",
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("101"));
    let out = wflo(&[
        "solve",
        "--config",
        "configs/wr1_100.toml",
        "--cutoff-seconds",
        "0",
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    let out = wflo(&[
        "solve",
        "--config",
        "configs/wr1_100.toml",
        "--solver",
        "cplex",
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
}

#[test]
fn empty_suite_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("empty.suite");
    std::fs::write(&suite, "# nothing to run\n").unwrap();
    ok(&wflo(&["benchmark", s(&suite), "--out", s(tmp.path())]));
    let report = json(&tmp.path().join("results.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 0);
    let csv = std::fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert!(csv.starts_with("case,solver,"));
}

#[test]
fn failing_cases_are_recorded_and_the_suite_continues() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("mixed.suite");
    let cfg = repo().join("configs/wr1_100.toml");
    std::fs::write(
        &suite,
        format!(
            "baseline = \"local\"\n\
             [[case]]\nlabel = \"broken\"\nconfig = \"missing.toml\"\nsolvers = [\"local\"]\n\
             [[case]]\nlabel = \"too-many\"\nconfig = \"{0}\"\nturbines = 500\nsolvers = [\"greedy\"]\n\
             [[case]]\nlabel = \"fine\"\nconfig = \"{0}\"\nturbines = 5\nsolvers = [\"greedy\", \"local\"]\ncutoff_seconds = 5.0\n",
            cfg.display()
        ),
    )
    .unwrap();
    ok(&wflo(&["benchmark", s(&suite), "--out", s(tmp.path())]));
    let rows = json(&tmp.path().join("results.json"))["rows"]
        .as_array()
        .unwrap()
        .clone();
    assert_eq!(rows.len(), 4);
    assert!(rows[0]["error"].as_str().unwrap().contains("missing.toml"));
    assert!(rows[1]["error"].as_str().unwrap().contains("500"));
    for row in &rows[2..] {
        assert!(row["error"].is_null());
        assert_eq!(row["cutoff_seconds"], 5.0);
        assert!(row["expected_power_kw"].as_f64().unwrap() > 0.0);
        assert!(row["pct_vs_baseline"].is_number());
        assert!(row["time_ratio_vs_baseline"].is_number());
    }
    assert_eq!(rows[3]["pct_vs_baseline"].as_f64().unwrap(), 0.0);
}

#[test]
fn table2_suite_covers_both_budgets() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&wflo(&[
        "benchmark",
        "suites/table2.suite",
        "--cutoff-seconds",
        "120",
        "--out",
        s(tmp.path()),
    ]));
    assert!(!stdout.contains("note:"));
    let rows = json(&tmp.path().join("results.json"))["rows"]
        .as_array()
        .unwrap()
        .clone();
    let budgets: std::collections::BTreeSet<u64> = rows.iter().map(|r| r["turbines"].as_u64().unwrap()).collect();
    assert_eq!(budgets.into_iter().collect::<Vec<_>>(), vec![26, 30]);
    for r in &rows {
        assert!(r["error"].is_null(), "{r}");
        assert_eq!(r["rose_states"], 1);
        assert_eq!(r["cells"], 100);
        assert_eq!(r["cutoff_seconds"], 120.0);
    }
}

#[test]
fn table3_suite_prints_the_rose_caveat() {
    let tmp = tempfile::tempdir().unwrap();
    let stdout = ok(&wflo(&["benchmark", "suites/table3.suite", "--out", s(tmp.path())]));
    assert!(stdout.contains("note: the bundled 36-direction rose"));
    let report = json(&tmp.path().join("results.json"));
    assert_eq!(report["notes"].as_array().unwrap().len(), 1);
    let rows = report["rows"].as_array().unwrap();
    let budgets: std::collections::BTreeSet<u64> = rows.iter().map(|r| r["turbines"].as_u64().unwrap()).collect();
    assert_eq!(budgets.into_iter().collect::<Vec<_>>(), vec![15, 39]);
    assert!(rows.iter().all(|r| r["rose_states"].as_u64().unwrap() > 36));
}

#[test]
fn render_draws_markers_at_layout_centroids() {
    let tmp = tempfile::tempdir().unwrap();
    solve("local", "30", tmp.path());
    let layout = tmp.path().join("layout.csv");
    let args = [
        "render",
        "--config",
        "configs/wr1_100.toml",
        "--layout",
        s(&layout),
        "--wind-arrow",
        "--out",
        s(tmp.path()),
    ];
    ok(&wflo(&args));
    let svg = std::fs::read(tmp.path().join("layout.svg")).unwrap();
    ok(&wflo(&args));
    assert_eq!(svg, std::fs::read(tmp.path().join("layout.svg")).unwrap());

    let svg = String::from_utf8(svg).unwrap();
    let csv = std::fs::read_to_string(&layout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 30);
    assert_eq!(svg.matches("<circle").count(), 30);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let marker = format!(r#"data-cell="{}" cx="{}" cy="{}""#, f[0], f[1], f[2]);
        assert!(svg.contains(&marker), "missing {marker}");
    }
    assert!(svg.contains(r#"id="wind""#));
}

#[test]
fn render_of_empty_layout_is_grid_only() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("empty.csv");
    std::fs::write(&layout, "cell_index,x_m,y_m\n").unwrap();
    ok(&wflo(&[
        "render",
        "--config",
        "configs/wr1_100.toml",
        "--layout",
        s(&layout),
        "--out",
        s(tmp.path()),
    ]));
    let svg = std::fs::read_to_string(tmp.path().join("layout.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 100);
    assert_eq!(svg.matches("<circle").count(), 0);
}

#[test]
fn render_rejects_cells_outside_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = tmp.path().join("bad.csv");
    std::fs::write(&layout, "cell_index,x_m,y_m\n100,2100,100\n").unwrap();
    let out = wflo(&[
        "render",
        "--config",
        "configs/wr1_100.toml",
        "--layout",
        s(&layout),
        "--out",
        s(tmp.path()),
    ]);
    assert!(!out.status.success());
    assert!(!tmp.path().join("layout.svg").exists());
}

#[test]
fn dumped_clusters_can_seed_another_budget() {
    let first = tempfile::tempdir().unwrap();
    let report = solve("mp", "26", first.path());
    let dumped = report["message_passing"]["clusters"].as_u64().unwrap();
    assert!(dumped > 0);

    let second = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(repo().join("configs/wr1_100.toml")).unwrap();
    let body = base.replace(
        "[output]",
        &format!(
            "clusters_file = \"{}\"\n\n[output]",
            first.path().join("clusters.txt").display()
        ),
    );
    let cfg = write_config(second.path(), &body);
    ok(&wflo(&[
        "solve",
        "--config",
        s(&cfg),
        "--turbines",
        "30",
        "--out",
        s(second.path()),
    ]));
    let report = json(&second.path().join("report.json"));
    assert!(report["message_passing"]["clusters"].as_u64().unwrap() >= dumped);
    assert!(report["evaluation"]["expected_power"].as_f64().unwrap() >= 13970.0);
    assert!(report["config"]["solver"]["clusters_file"].is_string());
}
