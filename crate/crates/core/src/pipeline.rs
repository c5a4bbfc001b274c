//! End-to-end runs: interaction matrix, solver of choice, decoding, repair
//! and true-power evaluation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{
    brute_force_with_budget, greedy_construct, local_search, Objective, DEFAULT_REPAIR_PASSES, ENUMERATION_BUDGET,
};
use crate::decode::{repair_swap, round_scores, round_top_k};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_layout, EvaluationReport};
use crate::exec;
use crate::farm::{FarmGrid, ProximityPairs, TurbineSpec};
use crate::mrf::{add_exclusions, build_penalized_mrf, default_beta, Layout, QipModel};
use crate::tightening::{tighten_and_resolve, TighteningConfig};
use crate::trws::{SolveReport, SolverConfig};
use crate::wake::{build_interaction_matrix, InteractionMatrix, WakeParams};
use crate::wind::WindRose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// TRW-S with triplet tightening, rounding and swap repair.
    Mp,
    Greedy,
    /// Swap local search with restarts.
    Local,
    /// Exhaustive enumeration.
    Brute,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Mp => "mp",
            SolverKind::Greedy => "greedy",
            SolverKind::Local => "local",
            SolverKind::Brute => "brute",
        }
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mp" => Ok(SolverKind::Mp),
            "greedy" => Ok(SolverKind::Greedy),
            "local" => Ok(SolverKind::Local),
            "brute" => Ok(SolverKind::Brute),
            other => Err(Error::Invalid(format!(
                "unknown solver `{other}` (expected mp, greedy, local or brute)"
            ))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpConfig {
    pub solver: SolverConfig,
    /// Zero disables tightening.
    pub max_clusters: usize,
    pub clusters_per_round: usize,
    pub round_sweeps: usize,
    /// Penalty weight; [`default_beta`] when absent.
    pub beta: Option<f64>,
    /// Exclusion penalty as a multiple of the penalty weight.
    pub exclusion_factor: f64,
    /// Allowed miss, in turbines, of the decoded labelling before the penalty doubles.
    pub count_slack: usize,
    pub max_beta_doublings: usize,
    pub repair_passes: usize,
    /// Roundings tried; all but the first perturb the min-marginal ranking
    /// with seeded noise.
    pub decode_restarts: usize,
    /// Noise amplitude as a fraction of the ranking's spread.
    pub decode_noise: f64,
    pub initial_clusters: Vec<[usize; 3]>,
}

impl Default for MpConfig {
    fn default() -> Self {
        let t = TighteningConfig::default();
        MpConfig {
            solver: SolverConfig::default(),
            max_clusters: t.max_clusters,
            clusters_per_round: t.clusters_per_round,
            round_sweeps: t.round_sweeps,
            beta: None,
            exclusion_factor: 1e3,
            count_slack: 2,
            max_beta_doublings: 4,
            repair_passes: DEFAULT_REPAIR_PASSES,
            decode_restarts: 16,
            decode_noise: 0.1,
            initial_clusters: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpOutcome {
    pub layout: Layout,
    pub report: SolveReport,
    pub beta: f64,
    pub clusters: Vec<[usize; 3]>,
    pub polytope_generation: usize,
    /// Turbines in the solver's own labelling before rounding.
    pub decoded_count: usize,
    /// Surrogate energy, before swap repair, of the rounding that won.
    pub rounded_energy: f64,
}

/// Penalized MRF solve followed by rounding and repair. Candidates are the
/// solver's best labelling (when feasible), the min-marginal ranking and its
/// seeded perturbations; the repaired candidate with the lowest surrogate
/// energy wins, earlier candidates on ties.
pub fn mp_solve(qip: &QipModel, cfg: &MpConfig) -> Result<MpOutcome> {
    let k = qip.k;
    let mut beta = cfg.beta.unwrap_or_else(|| default_beta(&qip.w, k));
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Invalid(format!("penalty weight must be > 0, got {beta}")));
    }
    let started = Instant::now();
    let mut doublings = 0;
    loop {
        let model = build_penalized_mrf(qip, beta)?;
        let model = if qip.exclusions.is_empty() {
            model
        } else {
            add_exclusions(&model, &qip.exclusions, cfg.exclusion_factor * beta)?
        };
        let mut solver = cfg.solver;
        if let Some(c) = solver.cutoff_seconds {
            solver.cutoff_seconds = Some((c - started.elapsed().as_secs_f64()).max(0.0));
        }
        let tcfg = TighteningConfig {
            max_clusters: cfg.max_clusters,
            clusters_per_round: cfg.clusters_per_round,
            round_sweeps: cfg.round_sweeps,
            initial_clusters: cfg.initial_clusters.clone(),
            solver,
            ..TighteningConfig::default()
        };
        let (tightened, report) = tighten_and_resolve(&model, &tcfg)?;
        let decoded_count = report.best_assignment.count();
        let miss = decoded_count.abs_diff(k);
        if miss > cfg.count_slack && doublings < cfg.max_beta_doublings {
            beta *= 2.0;
            doublings += 1;
            continue;
        }
        let mut starts = Vec::new();
        if qip.is_feasible(&report.best_assignment) {
            starts.push(report.best_assignment.clone());
        }
        starts.push(round_top_k(&report, k, &qip.exclusions)?);
        let advantage: Vec<f64> = report.min_marginals.iter().map(|m| m[0] - m[1]).collect();
        let spread = advantage.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - advantage.iter().copied().fold(f64::INFINITY, f64::min);
        let amplitude = cfg.decode_noise * if spread > 0.0 { spread } else { 1.0 };
        for r in 1..cfg.decode_restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
            rng.set_stream(r as u64);
            let noisy: Vec<f64> = advantage.iter().map(|a| a + amplitude * rng.gen::<f64>()).collect();
            starts.push(round_scores(&noisy, k, &qip.exclusions)?);
        }
        let repaired = exec::map_range(starts.len(), |i| -> Result<(f64, f64, Layout)> {
            let rounded = qip.surrogate_energy(&starts[i])?;
            let layout = repair_swap(&starts[i], qip, cfg.repair_passes)?;
            Ok((qip.surrogate_energy(&layout)?, rounded, layout))
        });
        let mut best: Option<(f64, f64, Layout)> = None;
        for candidate in repaired {
            let candidate = candidate?;
            if best.as_ref().is_none_or(|b| candidate.0 < b.0) {
                best = Some(candidate);
            }
        }
        let (_, rounded_energy, layout) = best.expect("at least one start");
        return Ok(MpOutcome {
            layout,
            report,
            beta,
            clusters: tightened.clusters.iter().map(|c| c.vertices).collect(),
            polytope_generation: tightened.polytope_generation,
            decoded_count,
            rounded_energy,
        });
    }
}

/// A complete problem: site, wind, turbine, wake model and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub grid: FarmGrid,
    pub rose: WindRose,
    pub spec: TurbineSpec,
    pub params: WakeParams,
    pub k: usize,
    pub exclusions: ProximityPairs,
}

impl Instance {
    pub fn interaction_matrix(&self) -> InteractionMatrix {
        build_interaction_matrix(&self.grid, &self.rose, &self.spec, &self.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverKind,
    pub mp: MpConfig,
    pub restarts: usize,
    pub seed: u64,
    pub enumeration_budget: u128,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverKind::Mp,
            mp: MpConfig::default(),
            restarts: 20,
            seed: 0,
            enumeration_budget: ENUMERATION_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub solver: SolverKind,
    pub layout: Layout,
    pub surrogate_energy: f64,
    pub evaluation: EvaluationReport,
    /// Present for the message-passing solver.
    pub mp: Option<MpOutcome>,
    pub matrix_seconds: f64,
    pub solve_seconds: f64,
}

impl RunOutcome {
    pub fn wall_time(&self) -> f64 {
        self.matrix_seconds + self.solve_seconds
    }
}

/// Builds the interaction matrix and runs [`solve_qip`] on it.
pub fn run_instance(instance: &Instance, cfg: &PipelineConfig) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let w = instance.interaction_matrix();
    let matrix_seconds = t0.elapsed().as_secs_f64();
    let qip = QipModel::new(w, instance.k, instance.exclusions.clone())?;
    let mut out = solve_qip(&qip, instance, cfg)?;
    out.matrix_seconds = matrix_seconds;
    Ok(out)
}

/// Runs the configured solver on a prepared QIP and evaluates the layout.
pub fn solve_qip(qip: &QipModel, instance: &Instance, cfg: &PipelineConfig) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let (layout, mp) = if qip.k == 0 {
        (Layout::empty(qip.n()), None)
    } else {
        match cfg.solver {
            SolverKind::Mp => {
                let out = mp_solve(qip, &cfg.mp)?;
                (out.layout.clone(), Some(out))
            }
            SolverKind::Greedy => (greedy_construct(qip)?, None),
            SolverKind::Local => (local_search(qip, cfg.restarts, cfg.seed)?.0, None),
            SolverKind::Brute => (
                brute_force_with_budget(qip, Objective::Surrogate, cfg.enumeration_budget)?.0,
                None,
            ),
        }
    };
    let solve_seconds = t0.elapsed().as_secs_f64();
    let evaluation = evaluate_layout(
        &layout,
        &instance.grid,
        &instance.rose,
        &instance.spec,
        &instance.params,
    )?;
    Ok(RunOutcome {
        solver: cfg.solver,
        surrogate_energy: qip.surrogate_energy(&layout)?,
        layout,
        evaluation,
        mp,
        matrix_seconds: 0.0,
        solve_seconds,
    })
}
