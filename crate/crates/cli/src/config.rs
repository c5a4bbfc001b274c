//! Run configuration: one TOML file fully determines a run.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wflo_core::evaluation::{load_power_curve, PowerCurve};
use wflo_core::farm::{
    load_speed_table, make_square_grid, proximity_pairs, FarmGrid, PowerModel, ProximityPairs, ThrustModel, TurbineSpec,
};
use wflo_core::pipeline::{Instance, MpConfig, PipelineConfig, SolverKind};
use wflo_core::trws::SolverConfig;
use wflo_core::wake::{axial_induction, WakeExpansion, WakeParams};
use wflo_core::wind::{builtin_wr1, builtin_wr36, load_rose, uniform_rose, WindRose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rose: RoseConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub turbine: TurbineConfig,
    #[serde(default)]
    pub wake: WakeConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Exactly one of `builtin`, `file` or `uniform`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoseConfig {
    /// `wr1` or `wr36`.
    pub builtin: Option<String>,
    pub file: Option<PathBuf>,
    pub uniform: Option<UniformRose>,
    pub observation_hours: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformRose {
    pub speed_ms: f64,
    pub directions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub area_side_m: f64,
    pub cells_per_side: usize,
}

/// Starts from `preset` (default `benchmark`); explicit fields override it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurbineConfig {
    /// `benchmark` or `nrel_5mw`.
    pub preset: Option<String>,
    pub rotor_radius_m: Option<f64>,
    pub hub_height_m: Option<f64>,
    pub thrust_coefficient: Option<f64>,
    /// `speed_ms,value` table of thrust coefficients.
    pub thrust_file: Option<PathBuf>,
    /// `speed_ms,value` power curve in kW; cubic power when absent.
    pub power_file: Option<PathBuf>,
    pub cut_in_ms: Option<f64>,
    pub cut_out_ms: Option<f64>,
    pub rated_power_kw: Option<f64>,
    /// Forbid pairs of turbines closer than five rotor radii.
    #[serde(default)]
    pub exclusions: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WakeConfig {
    pub decay: f64,
    /// Overrides the turbine's thrust for the wake model.
    pub thrust_coefficient: Option<f64>,
    pub induction: Option<f64>,
    pub expansion: WakeExpansion,
}

impl Default for WakeConfig {
    fn default() -> Self {
        WakeConfig {
            decay: 0.1,
            thrust_coefficient: None,
            induction: None,
            expansion: WakeExpansion::RotorRadius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub kind: SolverKind,
    pub turbines: usize,
    pub seed: u64,
    /// Local-search restarts.
    pub restarts: usize,
    pub max_sweeps: usize,
    pub tolerance: f64,
    /// Wall-clock limit for the message-passing solver.
    pub cutoff_seconds: f64,
    pub max_clusters: usize,
    pub clusters_per_round: usize,
    pub round_sweeps: usize,
    /// Penalty weight; derived from the interaction matrix when absent.
    pub beta: Option<f64>,
    pub count_slack: usize,
    pub max_beta_doublings: usize,
    pub decode_restarts: usize,
    pub enumeration_budget: u64,
    /// Triplets (`c a b c` lines) loaded as the initial cluster set.
    pub clusters_file: Option<PathBuf>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        SolverSection {
            kind: p.solver,
            turbines: 0,
            seed: p.seed,
            restarts: p.restarts,
            max_sweeps: p.mp.solver.max_sweeps,
            tolerance: p.mp.solver.tolerance,
            cutoff_seconds: p.mp.solver.cutoff_seconds.unwrap_or(3600.0),
            max_clusters: p.mp.max_clusters,
            clusters_per_round: p.mp.clusters_per_round,
            round_sweeps: p.mp.round_sweeps,
            beta: p.mp.beta,
            count_slack: p.mp.count_slack,
            max_beta_doublings: p.mp.max_beta_doublings,
            decode_restarts: p.mp.decode_restarts,
            enumeration_budget: p.enumeration_budget.min(u64::MAX as u128) as u64,
            clusters_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub solver: Option<SolverKind>,
    pub turbines: Option<usize>,
    pub seed: Option<u64>,
    pub cutoff_seconds: Option<f64>,
    pub max_clusters: Option<usize>,
    pub clusters_per_round: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Parses `path`; input file references are taken relative to the config's
    /// directory, the output directory relative to the working directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.rose.file.as_mut() {
            anchor(p);
        }
        if let Some(p) = cfg.turbine.thrust_file.as_mut() {
            anchor(p);
        }
        if let Some(p) = cfg.solver.clusters_file.as_mut() {
            anchor(p);
        }
        if let Some(p) = cfg.turbine.power_file.as_mut() {
            anchor(p);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.solver {
            self.solver.kind = v;
        }
        if let Some(v) = o.turbines {
            self.solver.turbines = v;
        }
        if let Some(v) = o.seed {
            self.solver.seed = v;
        }
        if let Some(v) = o.cutoff_seconds {
            self.solver.cutoff_seconds = v;
        }
        if let Some(v) = o.max_clusters {
            self.solver.max_clusters = v;
        }
        if let Some(v) = o.clusters_per_round {
            self.solver.clusters_per_round = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
    }

    pub fn rose(&self) -> Result<WindRose> {
        let r = &self.rose;
        let chosen =
            usize::from(r.builtin.is_some()) + usize::from(r.file.is_some()) + usize::from(r.uniform.is_some());
        if chosen != 1 {
            bail!("[rose] needs exactly one of `builtin`, `file` or `uniform`");
        }
        let rose = if let Some(name) = &r.builtin {
            match name.as_str() {
                "wr1" => builtin_wr1(),
                "wr36" => builtin_wr36(),
                other => bail!("unknown builtin rose `{other}` (expected wr1 or wr36)"),
            }
        } else if let Some(path) = &r.file {
            load_rose(path)?
        } else {
            let u = r.uniform.expect("checked above");
            uniform_rose(u.speed_ms, u.directions)?
        };
        Ok(match r.observation_hours {
            Some(h) => rose.with_observation_hours(h)?,
            None => rose,
        })
    }

    /// True when the rose is the bundled 36-direction table.
    pub fn uses_reconstructed_rose(&self) -> bool {
        self.rose.builtin.as_deref() == Some("wr36")
    }

    pub fn grid(&self) -> Result<FarmGrid> {
        Ok(make_square_grid(self.grid.area_side_m, self.grid.cells_per_side)?)
    }

    pub fn turbine(&self) -> Result<TurbineSpec> {
        let t = &self.turbine;
        let base = match t.preset.as_deref().unwrap_or("benchmark") {
            "benchmark" => TurbineSpec::benchmark(),
            "nrel_5mw" => TurbineSpec::nrel_5mw(),
            other => bail!("unknown turbine preset `{other}` (expected benchmark or nrel_5mw)"),
        };
        let thrust = match (t.thrust_coefficient, &t.thrust_file) {
            (Some(_), Some(_)) => bail!("[turbine] sets both `thrust_coefficient` and `thrust_file`"),
            (Some(ct), None) => ThrustModel::Constant(ct),
            (None, Some(path)) => ThrustModel::Table(load_speed_table(path)?),
            (None, None) => base.thrust,
        };
        let (power, rated) = match &t.power_file {
            Some(path) => {
                let curve = load_power_curve(path)?;
                let curve = match (t.cut_in_ms, t.cut_out_ms) {
                    (None, None) => curve,
                    (cut_in, cut_out) => PowerCurve::new(
                        curve.table().clone(),
                        cut_in.unwrap_or(curve.cut_in()),
                        cut_out.unwrap_or(curve.cut_out()),
                    )?,
                };
                let rated = curve.rated_power();
                (PowerModel::Curve(curve), Some(rated))
            }
            None => {
                if t.cut_in_ms.is_some() || t.cut_out_ms.is_some() {
                    bail!("[turbine] cut-in and cut-out need a `power_file`");
                }
                (base.power, base.rated_power)
            }
        };
        Ok(TurbineSpec::new(
            t.rotor_radius_m.unwrap_or(base.rotor_radius),
            t.hub_height_m.unwrap_or(base.hub_height),
            thrust,
            power,
            t.rated_power_kw.or(rated),
        )?)
    }

    pub fn wake(&self, spec: &TurbineSpec) -> Result<WakeParams> {
        let w = &self.wake;
        let induction = match (w.induction, w.thrust_coefficient) {
            (Some(_), Some(_)) => bail!("[wake] sets both `induction` and `thrust_coefficient`"),
            (Some(a), None) => a,
            (None, Some(ct)) => axial_induction(ct)?,
            // tabulated thrust replaces this per wind state
            (None, None) => match &spec.thrust {
                ThrustModel::Constant(ct) => axial_induction(*ct)?,
                ThrustModel::Table(t) => axial_induction(t.points()[0].1)?,
            },
        };
        Ok(WakeParams::new(w.decay, induction)?.with_expansion(w.expansion))
    }

    pub fn instance(&self) -> Result<Instance> {
        let grid = self.grid()?;
        let spec = self.turbine()?;
        let params = self.wake(&spec)?;
        let exclusions = if self.turbine.exclusions {
            proximity_pairs(&grid, &spec)
        } else {
            ProximityPairs::empty()
        };
        Ok(Instance {
            rose: self.rose()?,
            grid,
            spec,
            params,
            k: self.solver.turbines,
            exclusions,
        })
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let s = &self.solver;
        if !(s.cutoff_seconds.is_finite() && s.cutoff_seconds > 0.0) {
            bail!(
                "solver cut-off must be a positive number of seconds, got {}",
                s.cutoff_seconds
            );
        }
        if s.tolerance.is_nan() || s.tolerance < 0.0 {
            bail!("solver tolerance must be >= 0, got {}", s.tolerance);
        }
        if s.max_sweeps == 0 {
            bail!("solver needs at least one sweep");
        }
        if s.kind == SolverKind::Local && s.restarts == 0 {
            bail!("local search needs at least one restart");
        }
        let mp = MpConfig {
            solver: SolverConfig {
                max_sweeps: s.max_sweeps,
                tolerance: s.tolerance,
                cutoff_seconds: Some(s.cutoff_seconds),
                seed: s.seed,
            },
            max_clusters: s.max_clusters,
            clusters_per_round: s.clusters_per_round,
            round_sweeps: s.round_sweeps,
            beta: s.beta,
            count_slack: s.count_slack,
            max_beta_doublings: s.max_beta_doublings,
            decode_restarts: s.decode_restarts.max(1),
            initial_clusters: match &s.clusters_file {
                Some(path) => read_clusters(path)?,
                None => Vec::new(),
            },
            ..MpConfig::default()
        };
        Ok(PipelineConfig {
            solver: s.kind,
            mp,
            restarts: s.restarts,
            seed: s.seed,
            enumeration_budget: u128::from(s.enumeration_budget),
        })
    }
}

/// Reads `c a b c` lines; blank lines and `#` comments are skipped.
pub fn read_clusters(path: &Path) -> Result<Vec<[usize; 3]>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading clusters {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            ["c", a, b, c] => (|| Some([a.parse().ok()?, b.parse().ok()?, c.parse().ok()?]))(),
            _ => None,
        };
        match parsed {
            Some(t) => out.push(t),
            None => bail!("{}:{}: expected `c a b c`, got `{line}`", path.display(), n + 1),
        }
    }
    Ok(out)
}
