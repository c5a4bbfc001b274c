//! Sequential tree-reweighted message passing (TRW-S) for binary pairwise MRFs.
//!
//! The model is covered by monotonic chains under the vertex order. The solver
//! keeps the reparameterized potentials `phi_bar` directly instead of message
//! tables: passing a message from `s` to `t` moves the min-marginal of
//! `gamma_s * phi_bar_s + phi_bar_st` onto `phi_bar_t` and subtracts it from
//! the edge, which leaves the energy of every assignment unchanged.
//!
//! The lower bound is the sum over chains of the chain minimum, where each
//! chain receives a `1 / n_s` share of every unary (`n_s` = number of chains
//! through `s`) and the full potential of its edges. With `gamma_s = 1 / n_s`
//! this is the bound TRW-S keeps nondecreasing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::{energy_of, Layout, MrfModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Upper bound on forward+backward iterations.
    pub max_sweeps: usize,
    /// Stop once an iteration raises the lower bound by less than this.
    pub tolerance: f64,
    /// Wall-clock cut-off.
    pub cutoff_seconds: Option<f64>,
    /// Seed for randomized stages downstream of the solver; TRW-S itself is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_sweeps: 2000,
            tolerance: 1e-9,
            cutoff_seconds: Some(3600.0),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best_assignment: Layout,
    pub best_energy: f64,
    /// Lower bound after every sweep.
    pub lower_bound_trace: Vec<f64>,
    pub sweeps: usize,
    pub wall_time: f64,
    pub converged: bool,
    /// Per vertex: conditional energies of labels 0 and 1 when the best
    /// assignment was decoded.
    pub min_marginals: Vec<[f64; 2]>,
}

impl SolveReport {
    pub fn final_lower_bound(&self) -> f64 {
        self.lower_bound_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn gap(&self) -> f64 {
        self.best_energy - self.final_lower_bound()
    }
}

/// Monotonic chains covering every edge exactly once, with uniform weights.
#[derive(Debug, Clone)]
pub struct ChainDecomposition {
    vertex_order: Vec<usize>,
    offsets: Vec<usize>,
    vertices: Vec<u32>,
    chain_edges: Vec<u32>,
    rho: Vec<f64>,
    chains_through: Vec<u32>,
    edge_chain: Vec<u32>,
}

impl ChainDecomposition {
    pub fn vertex_order(&self) -> &[usize] {
        &self.vertex_order
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vertices of chain `c`, increasing in the vertex order.
    pub fn chain(&self, c: usize) -> &[u32] {
        &self.vertices[self.offsets[c]..self.offsets[c + 1]]
    }

    /// Edge indices of chain `c`; entry `k` joins vertices `k` and `k + 1`.
    pub fn chain_edges(&self, c: usize) -> &[u32] {
        let start = self.offsets[c] - c;
        let end = self.offsets[c + 1] - c - 1;
        &self.chain_edges[start..end]
    }

    pub fn chains(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len()).map(move |c| self.chain(c))
    }

    /// Only chains that carry at least one edge.
    pub fn edge_chains(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.chains().filter(|c| c.len() > 1)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Number of chains containing vertex `s`.
    pub fn chains_through(&self, s: usize) -> usize {
        self.chains_through[s] as usize
    }

    /// Chain holding edge `e`.
    pub fn chain_of_edge(&self, e: usize) -> usize {
        self.edge_chain[e] as usize
    }
}

/// Covers the model with monotonic chains in vertex index order.
///
/// Vertices without edges get a single-vertex chain so that every unary term
/// is represented in the bound; [`ChainDecomposition::edge_chains`] skips them.
pub fn decompose(model: &MrfModel) -> ChainDecomposition {
    let n = model.n_vertices();
    let adjacency = Adjacency::new(model);
    let mut arriving: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut chains: Vec<Vec<u32>> = Vec::new();
    let mut chain_edge_lists: Vec<Vec<u32>> = Vec::new();
    let mut chains_through = vec![0u32; n];
    for v in 0..n {
        let incoming = std::mem::take(&mut arriving[v]);
        let outgoing = adjacency.out(v);
        let through = incoming.len().max(outgoing.len());
        for (idx, &(t, e)) in outgoing.iter().enumerate() {
            let c = match incoming.get(idx) {
                Some(&c) => c as usize,
                None => {
                    chains.push(vec![v as u32]);
                    chain_edge_lists.push(Vec::new());
                    chains.len() - 1
                }
            };
            chains[c].push(t);
            chain_edge_lists[c].push(e);
            arriving[t as usize].push(c as u32);
        }
        if through == 0 {
            chains.push(vec![v as u32]);
            chain_edge_lists.push(Vec::new());
        }
        chains_through[v] = through.max(1) as u32;
    }
    let m = chains.len();
    let mut offsets = Vec::with_capacity(m + 1);
    offsets.push(0);
    let mut vertices = Vec::with_capacity(chains.iter().map(Vec::len).sum());
    let mut chain_edges = Vec::with_capacity(model.edge_count());
    let mut edge_chain = vec![0u32; model.edge_count()];
    for (c, (verts, edges)) in chains.into_iter().zip(chain_edge_lists).enumerate() {
        vertices.extend_from_slice(&verts);
        offsets.push(vertices.len());
        for &e in &edges {
            edge_chain[e as usize] = c as u32;
        }
        chain_edges.extend_from_slice(&edges);
    }
    ChainDecomposition {
        vertex_order: (0..n).collect(),
        offsets,
        vertices,
        chain_edges,
        rho: vec![if m > 0 { 1.0 / m as f64 } else { 0.0 }; m],
        chains_through,
        edge_chain,
    }
}

/// CSR adjacency split by direction in the vertex order.
#[derive(Debug, Clone)]
pub(crate) struct Adjacency {
    out_start: Vec<usize>,
    out_list: Vec<(u32, u32)>,
    in_start: Vec<usize>,
    in_list: Vec<(u32, u32)>,
}

impl Adjacency {
    pub(crate) fn new(model: &MrfModel) -> Self {
        let n = model.n_vertices();
        let mut out_deg = vec![0usize; n];
        let mut in_deg = vec![0usize; n];
        for e in model.edges() {
            out_deg[e.s] += 1;
            in_deg[e.t] += 1;
        }
        let prefix = |deg: &[usize]| {
            let mut start = Vec::with_capacity(n + 1);
            start.push(0);
            for d in deg {
                start.push(start.last().unwrap() + d);
            }
            start
        };
        let out_start = prefix(&out_deg);
        let in_start = prefix(&in_deg);
        let mut out_list = vec![(0u32, 0u32); model.edge_count()];
        let mut in_list = vec![(0u32, 0u32); model.edge_count()];
        let mut out_fill = out_start[..n].to_vec();
        let mut in_fill = in_start[..n].to_vec();
        // edges are sorted by (s, t), so both lists come out sorted by neighbor
        for (idx, e) in model.edges().iter().enumerate() {
            out_list[out_fill[e.s]] = (e.t as u32, idx as u32);
            out_fill[e.s] += 1;
            in_list[in_fill[e.t]] = (e.s as u32, idx as u32);
            in_fill[e.t] += 1;
        }
        Adjacency {
            out_start,
            out_list,
            in_start,
            in_list,
        }
    }

    /// Neighbors later in the order, with edge indices.
    #[inline]
    pub(crate) fn out(&self, v: usize) -> &[(u32, u32)] {
        &self.out_list[self.out_start[v]..self.out_start[v + 1]]
    }

    /// Neighbors earlier in the order, with edge indices.
    #[inline]
    pub(crate) fn inc(&self, v: usize) -> &[(u32, u32)] {
        &self.in_list[self.in_start[v]..self.in_start[v + 1]]
    }
}

/// Higher-order term over three vertices `a < b < c`, table index `4 xa + 2 xb + xc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTable {
    pub vertices: [usize; 3],
    /// Edge indices of `(a, b)`, `(a, c)`, `(b, c)`.
    pub edges: [usize; 3],
    pub table: [f64; 8],
}

impl ClusterTable {
    pub fn min(&self) -> f64 {
        self.table.iter().copied().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn value(&self, xa: u8, xb: u8, xc: u8) -> f64 {
        self.table[(4 * xa + 2 * xb + xc) as usize]
    }
}

/// Reparameterized potentials. Their energy equals the original model's
/// energy for every assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub unary: Vec<[f64; 2]>,
    pub pairwise: Vec<[f64; 4]>,
    pub clusters: Vec<ClusterTable>,
    endpoints: Vec<(u32, u32)>,
    constant: f64,
}

impl MessageState {
    pub fn new(model: &MrfModel) -> Self {
        MessageState {
            unary: model.unary().to_vec(),
            pairwise: model.edges().iter().map(|e| e.potential).collect(),
            clusters: Vec::new(),
            endpoints: model.edges().iter().map(|e| (e.s as u32, e.t as u32)).collect(),
            constant: model.constant(),
        }
    }

    /// Energy of an assignment under the reparameterized potentials.
    pub fn energy(&self, x: &[u8]) -> f64 {
        let unary: f64 = self.unary.iter().zip(x).map(|(u, &xi)| u[xi as usize]).sum();
        let pairwise: f64 = self
            .pairwise
            .iter()
            .zip(&self.endpoints)
            .map(|(p, &(s, t))| p[(2 * x[s as usize] + x[t as usize]) as usize])
            .sum();
        let clusters: f64 = self
            .clusters
            .iter()
            .map(|c| c.value(x[c.vertices[0]], x[c.vertices[1]], x[c.vertices[2]]))
            .sum();
        unary + pairwise + clusters + self.constant
    }

    /// Message `m_st(j) = min_i weight * phi_bar_s(i) + phi_bar_st(i, j)`.
    pub fn message(&self, model: &MrfModel, s: usize, t: usize, weight: f64) -> Result<[f64; 2]> {
        let e = self.edge_between(model, s, t)?;
        let u = self.unary[s];
        let p = self.pairwise[e];
        let at = |i: usize, j: usize| if s < t { p[2 * i + j] } else { p[2 * j + i] };
        Ok([
            (weight * u[0] + at(0, 0)).min(weight * u[1] + at(1, 0)),
            (weight * u[0] + at(0, 1)).min(weight * u[1] + at(1, 1)),
        ])
    }

    /// Adds the message from `s` to `phi_bar_t` and subtracts it from the edge.
    /// Returns the message.
    pub fn pass_message(&mut self, model: &MrfModel, s: usize, t: usize, weight: f64) -> Result<[f64; 2]> {
        let m = self.message(model, s, t, weight)?;
        let e = self.edge_between(model, s, t)?;
        let p = &mut self.pairwise[e];
        for i in 0..2 {
            for (j, mj) in m.iter().enumerate() {
                let idx = if s < t { 2 * i + j } else { 2 * j + i };
                p[idx] -= mj;
            }
        }
        self.unary[t][0] += m[0];
        self.unary[t][1] += m[1];
        Ok(m)
    }

    fn edge_between(&self, model: &MrfModel, s: usize, t: usize) -> Result<usize> {
        if s >= self.unary.len() || t >= self.unary.len() {
            return Err(Error::Invalid(format!("vertex out of range in ({s}, {t})")));
        }
        model
            .find_edge(s, t)
            .ok_or_else(|| Error::Invalid(format!("no edge between {s} and {t}")))
    }

    /// Message from the lower endpoint `s` to the higher endpoint `t` of edge `e`.
    #[inline]
    fn pass_forward(&mut self, e: usize, s: usize, t: usize, weight: f64) {
        let u = self.unary[s];
        let (g0, g1) = (weight * u[0], weight * u[1]);
        let p = &mut self.pairwise[e];
        let mut d0 = (g0 + p[0]).min(g1 + p[2]);
        let mut d1 = (g0 + p[1]).min(g1 + p[3]);
        let m = d0.min(d1);
        d0 -= m;
        d1 -= m;
        p[0] -= d0;
        p[2] -= d0;
        p[1] -= d1;
        p[3] -= d1;
        let ut = &mut self.unary[t];
        ut[0] += d0;
        ut[1] += d1;
    }

    /// Message from the higher endpoint `t` to the lower endpoint `s` of edge `e`.
    #[inline]
    fn pass_backward(&mut self, e: usize, t: usize, s: usize, weight: f64) {
        let u = self.unary[t];
        let (g0, g1) = (weight * u[0], weight * u[1]);
        let p = &mut self.pairwise[e];
        let mut d0 = (g0 + p[0]).min(g1 + p[1]);
        let mut d1 = (g0 + p[2]).min(g1 + p[3]);
        let m = d0.min(d1);
        d0 -= m;
        d1 -= m;
        p[0] -= d0;
        p[1] -= d0;
        p[2] -= d1;
        p[3] -= d1;
        let us = &mut self.unary[s];
        us[0] += d0;
        us[1] += d1;
    }
}

/// Labels from one decoding pass.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub assignment: Vec<u8>,
    pub energy: f64,
    pub conditional: Vec<[f64; 2]>,
}

/// Running results shared across the solves of a tightening schedule.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    pub(crate) started: Instant,
    pub(crate) trace: Vec<f64>,
    pub(crate) best: Option<Decoded>,
    pub(crate) converged: bool,
}

impl Tracker {
    pub(crate) fn new() -> Self {
        Tracker {
            started: Instant::now(),
            trace: Vec::new(),
            best: None,
            converged: false,
        }
    }

    pub(crate) fn offer(&mut self, d: Decoded) {
        let better = match &self.best {
            None => true,
            Some(b) => d.energy < b.energy,
        };
        if better {
            self.best = Some(d);
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    pub(crate) fn past_cutoff(&self, cfg: &SolverConfig) -> bool {
        cfg.cutoff_seconds.is_some_and(|c| self.elapsed() >= c)
    }

    pub(crate) fn report(self, n: usize) -> SolveReport {
        let wall_time = self.elapsed();
        let best = self.best.unwrap_or(Decoded {
            assignment: vec![0; n],
            energy: f64::INFINITY,
            conditional: vec![[0.0; 2]; n],
        });
        SolveReport {
            best_assignment: Layout::from_assignment(best.assignment).expect("decoded labels are binary"),
            best_energy: best.energy,
            sweeps: self.trace.len(),
            lower_bound_trace: self.trace,
            wall_time,
            converged: self.converged,
            min_marginals: best.conditional,
        }
    }
}

/// TRW-S over one model; owns the reparameterization and chain bookkeeping.
pub struct Solver<'m> {
    model: &'m MrfModel,
    decomposition: ChainDecomposition,
    adjacency: Adjacency,
    state: MessageState,
    gamma: Vec<f64>,
    inv_chains: Vec<f64>,
    chain_min: Vec<f64>,
    cluster_min: Vec<f64>,
    vertex_clusters: Vec<Vec<u32>>,
}

impl<'m> Solver<'m> {
    pub fn new(model: &'m MrfModel) -> Result<Self> {
        if model.n_vertices() == 0 {
            return Err(Error::Invalid("model has no vertices".into()));
        }
        let decomposition = decompose(model);
        let adjacency = Adjacency::new(model);
        let inv_chains: Vec<f64> = (0..model.n_vertices())
            .map(|s| 1.0 / decomposition.chains_through(s) as f64)
            .collect();
        let mut solver = Solver {
            model,
            chain_min: vec![0.0; decomposition.len()],
            gamma: inv_chains.clone(),
            inv_chains,
            decomposition,
            adjacency,
            state: MessageState::new(model),
            cluster_min: Vec::new(),
            vertex_clusters: vec![Vec::new(); model.n_vertices()],
        };
        solver.lower_bound();
        Ok(solver)
    }

    pub fn model(&self) -> &MrfModel {
        self.model
    }

    pub fn decomposition(&self) -> &ChainDecomposition {
        &self.decomposition
    }

    pub fn state(&self) -> &MessageState {
        &self.state
    }

    pub fn forward_pass(&mut self) {
        for v in 0..self.model.n_vertices() {
            let g = self.gamma[v];
            for k in self.adjacency.out_start[v]..self.adjacency.out_start[v + 1] {
                let (t, e) = self.adjacency.out_list[k];
                self.state.pass_forward(e as usize, v, t as usize, g);
            }
        }
    }

    pub fn backward_pass(&mut self) {
        for v in (0..self.model.n_vertices()).rev() {
            let g = self.gamma[v];
            for k in self.adjacency.in_start[v]..self.adjacency.in_start[v + 1] {
                let (s, e) = self.adjacency.in_list[k];
                self.state.pass_backward(e as usize, v, s as usize, g);
            }
        }
    }

    fn chain_minimum(&self, c: usize) -> f64 {
        let verts = self.decomposition.chain(c);
        let edges = self.decomposition.chain_edges(c);
        let v0 = verts[0] as usize;
        let w0 = self.inv_chains[v0];
        let (mut f0, mut f1) = (w0 * self.state.unary[v0][0], w0 * self.state.unary[v0][1]);
        for (k, &e) in edges.iter().enumerate() {
            let v = verts[k + 1] as usize;
            let w = self.inv_chains[v];
            let u = self.state.unary[v];
            let p = self.state.pairwise[e as usize];
            let n0 = (f0 + p[0]).min(f1 + p[2]) + w * u[0];
            let n1 = (f0 + p[1]).min(f1 + p[3]) + w * u[1];
            f0 = n0;
            f1 = n1;
        }
        f0.min(f1)
    }

    /// Recomputes every chain minimum and returns the bound.
    pub fn lower_bound(&mut self) -> f64 {
        for c in 0..self.decomposition.len() {
            self.chain_min[c] = self.chain_minimum(c);
        }
        for (i, c) in self.state.clusters.iter().enumerate() {
            self.cluster_min[i] = c.min();
        }
        self.cached_bound()
    }

    fn cached_bound(&self) -> f64 {
        self.chain_min.iter().sum::<f64>() + self.cluster_min.iter().sum::<f64>() + self.state.constant
    }

    /// One forward pass, one backward pass, one pass over clusters; returns the new bound.
    pub fn sweep(&mut self) -> f64 {
        self.forward_pass();
        self.backward_pass();
        if !self.state.clusters.is_empty() {
            self.lower_bound();
            for c in 0..self.state.clusters.len() {
                self.update_cluster(c);
            }
        }
        self.lower_bound()
    }

    /// Sequential conditional decoding: each vertex takes the label minimizing
    /// its reparameterized unary plus the edges (and clusters) to vertices
    /// already labelled. Ties go to label 0.
    pub fn decode(&self) -> Decoded {
        let n = self.model.n_vertices();
        let mut x = vec![0u8; n];
        let mut conditional = vec![[0.0; 2]; n];
        for v in 0..n {
            let mut c = self.state.unary[v];
            for &(u, e) in self.adjacency.inc(v) {
                let p = &self.state.pairwise[e as usize];
                let xu = x[u as usize] as usize;
                c[0] += p[2 * xu];
                c[1] += p[2 * xu + 1];
            }
            for &ci in &self.vertex_clusters[v] {
                let cl = &self.state.clusters[ci as usize];
                for (label, slot) in c.iter_mut().enumerate() {
                    *slot += conditional_cluster(cl, v, label as u8, &x);
                }
            }
            x[v] = u8::from(c[1] < c[0]);
            conditional[v] = c;
        }
        let energy = energy_of(self.model, &x);
        Decoded {
            assignment: x,
            energy,
            conditional,
        }
    }

    /// Runs sweeps until the bound stalls, `max_sweeps` is reached or the cut-off passes.
    pub fn solve(&mut self, cfg: &SolverConfig) -> SolveReport {
        let mut tracker = Tracker::new();
        self.solve_into(cfg, cfg.max_sweeps, &mut tracker);
        tracker.report(self.model.n_vertices())
    }

    pub(crate) fn solve_into(&mut self, cfg: &SolverConfig, max_sweeps: usize, tracker: &mut Tracker) {
        let mut previous = tracker.trace.last().copied().unwrap_or_else(|| self.cached_bound());
        tracker.converged = false;
        for _ in 0..max_sweeps {
            let bound = self.sweep();
            tracker.trace.push(bound);
            tracker.offer(self.decode());
            let improvement = bound - previous;
            previous = bound;
            if improvement < cfg.tolerance {
                tracker.converged = true;
                break;
            }
            if tracker.past_cutoff(cfg) {
                break;
            }
        }
    }

    /// Registers a triplet cluster with a zero table. The three edges must exist.
    pub fn add_cluster(&mut self, vertices: [usize; 3]) -> Result<usize> {
        let mut v = vertices;
        v.sort_unstable();
        if v[0] == v[1] || v[1] == v[2] || v[2] >= self.model.n_vertices() {
            return Err(Error::Invalid(format!("invalid triplet {vertices:?}")));
        }
        let edge = |a: usize, b: usize| {
            self.model
                .find_edge(a, b)
                .ok_or_else(|| Error::Invalid(format!("triplet {v:?} lacks edge ({a}, {b})")))
        };
        let edges = [edge(v[0], v[1])?, edge(v[0], v[2])?, edge(v[1], v[2])?];
        let idx = self.state.clusters.len();
        self.state.clusters.push(ClusterTable {
            vertices: v,
            edges,
            table: [0.0; 8],
        });
        self.cluster_min.push(0.0);
        for &x in &v {
            self.vertex_clusters[x].push(idx as u32);
        }
        Ok(idx)
    }

    pub fn has_cluster(&self, vertices: [usize; 3]) -> bool {
        let mut v = vertices;
        v.sort_unstable();
        self.vertex_clusters[v[0]]
            .iter()
            .any(|&c| self.state.clusters[c as usize].vertices == v)
    }

    pub fn clusters(&self) -> &[ClusterTable] {
        &self.state.clusters
    }

    /// Moves the three edge potentials of cluster `c` into its table and hands
    /// back a share of the table's edge min-marginals, keeping whichever of
    /// the candidate splits raises the bound most. Nothing changes when no
    /// candidate raises it. Returns the bound increase.
    pub fn update_cluster(&mut self, c: usize) -> f64 {
        let cl = self.state.clusters[c].clone();
        let [eab, eac, ebc] = cl.edges;
        let saved = [
            self.state.pairwise[eab],
            self.state.pairwise[eac],
            self.state.pairwise[ebc],
        ];
        let mut chains: Vec<usize> = cl.edges.iter().map(|&e| self.decomposition.chain_of_edge(e)).collect();
        chains.sort_unstable();
        chains.dedup();
        let before: f64 = chains.iter().map(|&ch| self.chain_min[ch]).sum::<f64>() + self.cluster_min[c];

        let mut absorbed = cl.table;
        for (idx, slot) in absorbed.iter_mut().enumerate() {
            let (xa, xb, xc) = (idx >> 2, (idx >> 1) & 1, idx & 1);
            *slot += saved[0][2 * xa + xb] + saved[1][2 * xa + xc] + saved[2][2 * xb + xc];
        }
        let mut best: Option<(f64, [f64; 8], [[f64; 4]; 3])> = None;
        for share in [0.0, 1.0 / 3.0, 0.5] {
            let (table, given) = split_cluster(&absorbed, share);
            self.state.pairwise[eab] = given[0];
            self.state.pairwise[eac] = given[1];
            self.state.pairwise[ebc] = given[2];
            let after: f64 = chains.iter().map(|&ch| self.chain_minimum(ch)).sum::<f64>()
                + table.iter().copied().fold(f64::INFINITY, f64::min);
            let gain = after - before;
            if best.as_ref().is_none_or(|b| gain > b.0) {
                best = Some((gain, table, given));
            }
        }
        let (gain, table, given) = best.expect("at least one split evaluated");
        let scale = before.abs().max(1.0);
        if gain > 1e-12 * scale {
            self.state.clusters[c].table = table;
            self.state.pairwise[eab] = given[0];
            self.state.pairwise[eac] = given[1];
            self.state.pairwise[ebc] = given[2];
            for &ch in &chains {
                self.chain_min[ch] = self.chain_minimum(ch);
            }
            self.cluster_min[c] = self.state.clusters[c].min();
            gain
        } else {
            self.state.pairwise[eab] = saved[0];
            self.state.pairwise[eac] = saved[1];
            self.state.pairwise[ebc] = saved[2];
            0.0
        }
    }
}

/// Gives each edge `share` of the table's min-marginal on that edge and keeps the rest.
fn split_cluster(table: &[f64; 8], share: f64) -> ([f64; 8], [[f64; 4]; 3]) {
    let mut given = [[f64::INFINITY; 4]; 3];
    if share == 0.0 {
        return (*table, [[0.0; 4]; 3]);
    }
    for (idx, &v) in table.iter().enumerate() {
        let (xa, xb, xc) = (idx >> 2, (idx >> 1) & 1, idx & 1);
        let ab = &mut given[0][2 * xa + xb];
        *ab = ab.min(v);
        let ac = &mut given[1][2 * xa + xc];
        *ac = ac.min(v);
        let bc = &mut given[2][2 * xb + xc];
        *bc = bc.min(v);
    }
    for g in given.iter_mut() {
        for v in g.iter_mut() {
            *v *= share;
        }
    }
    let mut rest = *table;
    for (idx, slot) in rest.iter_mut().enumerate() {
        let (xa, xb, xc) = (idx >> 2, (idx >> 1) & 1, idx & 1);
        *slot -= given[0][2 * xa + xb] + given[1][2 * xa + xc] + given[2][2 * xb + xc];
    }
    (rest, given)
}

/// Cluster contribution to vertex `v` taking `label`, minimizing over members
/// that come later in the order.
fn conditional_cluster(cl: &ClusterTable, v: usize, label: u8, x: &[u8]) -> f64 {
    let [a, b, _] = cl.vertices;
    if v == a {
        (0..4u8)
            .map(|r| cl.value(label, r >> 1, r & 1))
            .fold(f64::INFINITY, f64::min)
    } else if v == b {
        (0..2u8).map(|r| cl.value(x[a], label, r)).fold(f64::INFINITY, f64::min)
    } else {
        cl.value(x[a], x[b], label)
    }
}

/// Solves `model` from scratch.
pub fn run(model: &MrfModel, cfg: &SolverConfig) -> Result<SolveReport> {
    let mut solver = Solver::new(model)?;
    Ok(solver.solve(cfg))
}
