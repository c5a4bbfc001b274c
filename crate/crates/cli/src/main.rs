mod config;
mod render;
mod suite;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use wflo_core::decode::{read_layout_csv, write_layout_csv};
use wflo_core::evaluation::EvaluationReport;
use wflo_core::pipeline::{run_instance, SolverKind};
use wflo_core::trws::SolveReport;

use config::{Overrides, RunConfig};

/// Wind-farm layout optimization on a discretized site.
#[derive(Parser)]
#[command(name = "wflo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the wake interaction matrix and write it as `matrix.csv`.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `[output] dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize a layout; writes `layout.csv` and `report.json`.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every case of a suite file; writes `results.csv` and `results.json`.
    Benchmark {
        suite: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
        /// Defaults to `out/<suite name>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a layout CSV on the config's grid as `layout.svg`.
    Render {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        layout: PathBuf,
        /// Add an arrow for the rose's dominant direction.
        #[arg(long)]
        wind_arrow: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Knobs {
    #[arg(long)]
    solver: Option<SolverKind>,
    /// Number of turbines to place.
    #[arg(long)]
    turbines: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cutoff_seconds: Option<f64>,
    #[arg(long)]
    max_clusters: Option<usize>,
    #[arg(long)]
    clusters_per_round: Option<usize>,
}

impl Knobs {
    fn overrides(&self, out: Option<PathBuf>) -> Overrides {
        Overrides {
            solver: self.solver,
            turbines: self.turbines,
            seed: self.seed,
            cutoff_seconds: self.cutoff_seconds,
            max_clusters: self.max_clusters,
            clusters_per_round: self.clusters_per_round,
            out,
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Matrix { config, out } => cmd_matrix(&config, out),
        Command::Solve { config, knobs, out } => cmd_solve(&config, &knobs.overrides(out)),
        Command::Benchmark { suite, knobs, out } => cmd_benchmark(&suite, &knobs, out),
        Command::Render {
            config,
            layout,
            wind_arrow,
            out,
        } => cmd_render(&config, &layout, wind_arrow, out),
    }
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(overrides);
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn cmd_matrix(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(
        config,
        &Overrides {
            out,
            ..Overrides::default()
        },
    )?;
    let instance = cfg.instance()?;
    let t0 = Instant::now();
    let w = instance.interaction_matrix();
    let seconds = t0.elapsed().as_secs_f64();
    let (path, file) = create(&cfg.output.dir, "matrix.csv")?;
    w.write_csv(file)
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "{} cells, {} nonzeros, max asymmetry {:.3e}, one-sided {}, {seconds:.2} s -> {}",
        w.n(),
        w.nonzero_count(),
        w.max_asymmetry(),
        w.is_one_sided(),
        path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    config: &'a RunConfig,
    solver: SolverKind,
    turbines: usize,
    layout: Vec<usize>,
    surrogate_energy: f64,
    matrix_seconds: f64,
    solve_seconds: f64,
    evaluation: &'a EvaluationReport,
    message_passing: Option<MpSummary<'a>>,
}

#[derive(Serialize)]
struct MpSummary<'a> {
    beta: f64,
    clusters: usize,
    polytope_generation: usize,
    decoded_count: usize,
    rounded_energy: f64,
    solve_report: &'a SolveReport,
}

fn cmd_solve(config: &Path, overrides: &Overrides) -> Result<()> {
    let cfg = load_config(config, overrides)?;
    let pipeline = cfg.pipeline()?;
    let instance = cfg.instance()?;
    let out = run_instance(&instance, &pipeline)?;
    let dir = &cfg.output.dir;

    let (layout_path, file) = create(dir, "layout.csv")?;
    write_layout_csv(&out.layout, &instance.grid, file)?;
    if let Some(mp) = out.mp.as_ref().filter(|m| !m.clusters.is_empty()) {
        use std::io::Write;
        let (path, mut file) = create(dir, "clusters.txt")?;
        for c in &mp.clusters {
            writeln!(file, "c {} {} {}", c[0], c[1], c[2]).with_context(|| format!("writing {}", path.display()))?;
        }
        file.flush()?;
    }
    let report = SolveOutput {
        config: &cfg,
        solver: out.solver,
        turbines: out.layout.count(),
        layout: out.layout.selected(),
        surrogate_energy: out.surrogate_energy,
        matrix_seconds: out.matrix_seconds,
        solve_seconds: out.solve_seconds,
        evaluation: &out.evaluation,
        message_passing: out.mp.as_ref().map(|m| MpSummary {
            beta: m.beta,
            clusters: m.clusters.len(),
            polytope_generation: m.polytope_generation,
            decoded_count: m.decoded_count,
            rounded_energy: m.rounded_energy,
            solve_report: &m.report,
        }),
    };
    let (report_path, file) = create(dir, "report.json")?;
    serde_json::to_writer_pretty(file, &report).with_context(|| format!("writing {}", report_path.display()))?;
    println!(
        "{}: {} turbines, expected power {:.1} kW, AEP {:.0} kWh, {:.2} s -> {}, {}",
        out.solver,
        out.layout.count(),
        out.evaluation.expected_power,
        out.evaluation.aep,
        out.wall_time(),
        layout_path.display(),
        report_path.display()
    );
    Ok(())
}

fn cmd_benchmark(path: &Path, knobs: &Knobs, out: Option<PathBuf>) -> Result<()> {
    let s = suite::Suite::load(path)?;
    let name = path
        .file_stem()
        .map_or("suite".into(), |n| n.to_string_lossy().into_owned());
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(&name));
    let report = suite::run_suite(&s, &name, &knobs.overrides(None));
    for note in &report.notes {
        println!("note: {note}");
    }
    for row in &report.rows {
        match (&row.error, row.expected_power_kw) {
            (Some(e), _) => println!("{:<16} {:<6} error: {e}", row.case, row.solver),
            (None, Some(p)) => println!(
                "{:<16} {:<6} {:>10.1} kW {:>8.2} s{}{}",
                row.case,
                row.solver,
                p,
                row.wall_time_s.unwrap_or(0.0),
                row.pct_vs_reference
                    .map_or(String::new(), |v| format!("  {v:+.2}% vs reference")),
                row.pct_vs_baseline
                    .map_or(String::new(), |v| format!("  {v:+.2}% vs baseline")),
            ),
            (None, None) => {}
        }
    }
    let (csv_path, json_path) = suite::write_reports(&report, &dir)?;
    println!(
        "{} rows -> {}, {}",
        report.rows.len(),
        csv_path.display(),
        json_path.display()
    );
    Ok(())
}

fn cmd_render(config: &Path, layout: &Path, wind_arrow: bool, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(
        config,
        &Overrides {
            out,
            ..Overrides::default()
        },
    )?;
    let grid = cfg.grid()?;
    let file = File::open(layout).with_context(|| format!("reading layout {}", layout.display()))?;
    let l = read_layout_csv(file, &layout.display().to_string(), &grid)?;
    let wind = if wind_arrow {
        Some(cfg.rose()?.dominant_direction())
    } else {
        None
    };
    let svg = render::render_svg(&grid, &l, wind)?;
    std::fs::create_dir_all(&cfg.output.dir).with_context(|| format!("creating {}", cfg.output.dir.display()))?;
    let path = cfg.output.dir.join("layout.svg");
    std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    println!("{} turbines -> {}", l.count(), path.display());
    Ok(())
}
