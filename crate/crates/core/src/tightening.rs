//! Triplet clusters that tighten the pairwise relaxation, added in rounds
//! between warm-started TRW-S solves.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::exec;
use crate::mrf::MrfModel;
use crate::trws::{MessageState, SolveReport, Solver, SolverConfig, Tracker};

/// Share of edges, by coupling strength, whose triangles are scored.
pub const CANDIDATE_FRACTION: f64 = 0.05;
/// Lower limit on the number of candidate edges on small models.
pub const MIN_CANDIDATE_EDGES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletCluster {
    /// Sorted ascending.
    pub vertices: [usize; 3],
    /// Index `4 xa + 2 xb + xc`.
    pub table: [f64; 8],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TightenedModel {
    /// Input model plus any zero edges the clusters needed.
    pub base: MrfModel,
    pub clusters: Vec<TripletCluster>,
    pub polytope_generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TighteningConfig {
    pub max_clusters: usize,
    pub clusters_per_round: usize,
    /// Sweep cap for each re-solve after a round of additions.
    pub round_sweeps: usize,
    pub candidate_fraction: f64,
    pub min_candidate_edges: usize,
    /// Clusters installed before the first solve, e.g. reused from another budget.
    pub initial_clusters: Vec<[usize; 3]>,
    pub solver: SolverConfig,
}

impl Default for TighteningConfig {
    fn default() -> Self {
        TighteningConfig {
            max_clusters: 5000,
            clusters_per_round: 20,
            round_sweeps: 100,
            candidate_fraction: CANDIDATE_FRACTION,
            min_candidate_edges: MIN_CANDIDATE_EDGES,
            initial_clusters: Vec::new(),
            solver: SolverConfig::default(),
        }
    }
}

/// `|phi00 + phi11 - phi01 - phi10|`, unchanged by messages.
fn edge_strength(p: &[f64; 4]) -> f64 {
    (p[0] + p[3] - p[1] - p[2]).abs()
}

/// Bound gain available from a triangle: joint minimum of its three edge
/// terms minus the sum of their separate minima. Never negative.
pub fn triplet_score(pab: &[f64; 4], pac: &[f64; 4], pbc: &[f64; 4]) -> f64 {
    let mut joint = f64::INFINITY;
    for idx in 0..8 {
        let (xa, xb, xc) = (idx >> 2, (idx >> 1) & 1, idx & 1);
        joint = joint.min(pab[2 * xa + xb] + pac[2 * xa + xc] + pbc[2 * xb + xc]);
    }
    let separate: f64 = [pab, pac, pbc]
        .iter()
        .map(|p| p.iter().copied().fold(f64::INFINITY, f64::min))
        .sum();
    (joint - separate).max(0.0)
}

pub fn score_candidate_triplets(
    model: &MrfModel,
    state: &MessageState,
    max_candidates: usize,
) -> Vec<([usize; 3], f64)> {
    score_candidates_with(
        model,
        state,
        max_candidates,
        CANDIDATE_FRACTION,
        MIN_CANDIDATE_EDGES,
        &HashSet::new(),
    )
}

/// Scores every triangle whose three edges are among the strongest
/// `max(fraction * E, min_edges)` edges, skipping `existing` triplets.
/// Ranked by descending score, then by vertex triple.
pub fn score_candidates_with(
    model: &MrfModel,
    state: &MessageState,
    max_candidates: usize,
    fraction: f64,
    min_edges: usize,
    existing: &HashSet<[usize; 3]>,
) -> Vec<([usize; 3], f64)> {
    let e = model.edge_count();
    if e < 3 || max_candidates == 0 {
        return Vec::new();
    }
    let keep = ((fraction * e as f64).ceil() as usize).max(min_edges).min(e);
    let mut order: Vec<usize> = (0..e).collect();
    order.sort_by(|&a, &b| {
        edge_strength(&state.pairwise[b])
            .total_cmp(&edge_strength(&state.pairwise[a]))
            .then(a.cmp(&b))
    });
    let mut strong: Vec<usize> = order[..keep].to_vec();
    strong.sort_unstable();
    let n = model.n_vertices();
    let mut later: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &idx in &strong {
        let edge = &model.edges()[idx];
        later[edge.s].push((edge.t, idx));
    }
    let found = exec::map_range(strong.len(), |k| {
        let ab = &model.edges()[strong[k]];
        let (a, b) = (ab.s, ab.t);
        let mut out = Vec::new();
        // c > b reached from both a and b keeps each triangle once
        for &(c, eac) in later[a].iter().filter(|&&(c, _)| c > b) {
            if let Ok(pos) = later[b].binary_search_by(|&(v, _)| v.cmp(&c)) {
                let ebc = later[b][pos].1;
                let tri = [a, b, c];
                if existing.contains(&tri) {
                    continue;
                }
                let score = triplet_score(&state.pairwise[strong[k]], &state.pairwise[eac], &state.pairwise[ebc]);
                out.push((tri, score));
            }
        }
        out
    });
    let mut all: Vec<([usize; 3], f64)> = found.into_iter().flatten().collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    all.truncate(max_candidates);
    all
}

/// Solve, then repeatedly add the best-scoring clusters and re-solve from the
/// current reparameterization until the cluster budget is spent, no triangle
/// scores above zero, or the cut-off passes.
pub fn tighten_and_resolve(model: &MrfModel, cfg: &TighteningConfig) -> Result<(TightenedModel, SolveReport)> {
    let mut base = model.clone();
    let mut initial: Vec<[usize; 3]> = Vec::new();
    for tri in cfg.initial_clusters.iter().take(cfg.max_clusters) {
        let mut v = *tri;
        v.sort_unstable();
        if v[0] == v[1] || v[1] == v[2] || v[2] >= base.n_vertices() || initial.contains(&v) {
            continue;
        }
        base.ensure_edge(v[0], v[1]);
        base.ensure_edge(v[0], v[2]);
        base.ensure_edge(v[1], v[2]);
        initial.push(v);
    }
    let mut tracker = Tracker::new();
    let mut generation = 0;
    let clusters = {
        let mut solver = Solver::new(&base)?;
        let mut existing = HashSet::new();
        for v in &initial {
            solver.add_cluster(*v)?;
            existing.insert(*v);
        }
        solver.solve_into(&cfg.solver, cfg.solver.max_sweeps, &mut tracker);
        while existing.len() < cfg.max_clusters && !tracker.past_cutoff(&cfg.solver) {
            let room = cfg.clusters_per_round.min(cfg.max_clusters - existing.len());
            let picks: Vec<[usize; 3]> = score_candidates_with(
                &base,
                solver.state(),
                room,
                cfg.candidate_fraction,
                cfg.min_candidate_edges,
                &existing,
            )
            .into_iter()
            .filter(|&(_, s)| s > 1e-9)
            .map(|(t, _)| t)
            .collect();
            if picks.is_empty() {
                break;
            }
            for t in picks {
                solver.add_cluster(t)?;
                existing.insert(t);
            }
            generation += 1;
            solver.solve_into(&cfg.solver, cfg.round_sweeps.max(1), &mut tracker);
        }
        solver
            .clusters()
            .iter()
            .map(|c| TripletCluster {
                vertices: c.vertices,
                table: c.table,
            })
            .collect()
    };
    let report = tracker.report(base.n_vertices());
    Ok((
        TightenedModel {
            base,
            clusters,
            polytope_generation: generation,
        },
        report,
    ))
}

/// One `c a b c` line per cluster.
pub fn write_clusters<W: Write>(clusters: &[TripletCluster], mut out: W) -> std::io::Result<()> {
    for c in clusters {
        writeln!(out, "c {} {} {}", c.vertices[0], c.vertices[1], c.vertices[2])?;
    }
    Ok(())
}
