//! Penalized quadratic program and its pairwise binary Markov random field.
//!
//! The budget constraint `e^T X = K` is folded into the objective as
//! `X^T W X + beta (e^T X - K)^2`. Over binary `X` this expands to
//!
//! * unary `phi_s(1) = beta (1 - 2K)`, `phi_s(0) = 0`,
//! * pairwise `phi_st(1,1) = w_st + w_ts + 2 beta` for every unordered pair,
//! * constant `beta K^2`,
//!
//! so the MRF energy reproduces the penalized objective for every assignment.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::farm::ProximityPairs;
use crate::wake::InteractionMatrix;

/// Binary layout: `assignment[i] == 1` when cell `i` holds a turbine.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Layout {
    assignment: Vec<u8>,
}

impl Layout {
    pub fn empty(n: usize) -> Self {
        Layout { assignment: vec![0; n] }
    }

    pub fn from_assignment(assignment: Vec<u8>) -> Result<Self> {
        if let Some(v) = assignment.iter().find(|&&v| v > 1) {
            return Err(Error::Invalid(format!("layout entries must be 0 or 1, got {v}")));
        }
        Ok(Layout { assignment })
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut assignment = vec![0u8; n];
        for &i in indices {
            if i >= n {
                return Err(Error::Invalid(format!("cell index {i} out of range for {n} cells")));
            }
            assignment[i] = 1;
        }
        Ok(Layout { assignment })
    }

    pub fn assignment(&self) -> &[u8] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn count(&self) -> usize {
        self.assignment.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_on(&self, i: usize) -> bool {
        self.assignment[i] == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.assignment[i] = on as u8;
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..self.assignment.len())
            .filter(|&i| self.assignment[i] == 1)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QipModel {
    pub w: InteractionMatrix,
    pub k: usize,
    pub exclusions: ProximityPairs,
}

impl QipModel {
    pub fn new(w: InteractionMatrix, k: usize, exclusions: ProximityPairs) -> Result<Self> {
        let n = w.n();
        if k > n {
            return Err(Error::Invalid(format!("turbine budget {k} exceeds {n} cells")));
        }
        if let Some(max) = exclusions.max_index() {
            if max >= n {
                return Err(Error::Invalid(format!("exclusion references cell {max} of {n}")));
            }
        }
        Ok(QipModel { w, k, exclusions })
    }

    pub fn n(&self) -> usize {
        self.w.n()
    }

    /// Surrogate objective `X^T W X`.
    pub fn surrogate_energy(&self, layout: &Layout) -> Result<f64> {
        if layout.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: layout.len(),
            });
        }
        Ok(self.w.quadratic_form(layout.assignment()))
    }

    /// Exactly `k` turbines and no exclusion pair occupied.
    pub fn is_feasible(&self, layout: &Layout) -> bool {
        layout.len() == self.n()
            && layout.count() == self.k
            && self.exclusions.violated_by(layout.assignment()).is_none()
    }
}

/// Smallest penalty that makes every global minimizer use exactly `k` turbines:
/// one plus the largest interaction a single turbine can pick up from `k` others.
pub fn default_beta(w: &InteractionMatrix, k: usize) -> f64 {
    let n = w.n();
    let take = k.min(n.saturating_sub(1));
    let mut worst = 0.0f64;
    let mut row = vec![0.0; n];
    for i in 0..n {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = w.symmetric(i, j);
        }
        if take == 0 {
            continue;
        }
        if take < n {
            row.select_nth_unstable_by(take - 1, |a, b| b.total_cmp(a));
        }
        worst = worst.max(row[..take].iter().sum());
    }
    1.0 + worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub s: usize,
    pub t: usize,
    /// `[phi(0,0), phi(0,1), phi(1,0), phi(1,1)]`, first label belongs to `s`.
    pub potential: [f64; 4],
}

impl Edge {
    #[inline]
    pub fn value(&self, xs: u8, xt: u8) -> f64 {
        self.potential[(2 * xs + xt) as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrfModel {
    n_vertices: usize,
    unary: Vec<[f64; 2]>,
    edges: Vec<Edge>,
    constant: f64,
}

impl MrfModel {
    /// Builds a model from explicit potentials. Edges are canonicalized to
    /// `s < t`; duplicate pairs are rejected.
    pub fn new(unary: Vec<[f64; 2]>, edges: Vec<Edge>, constant: f64) -> Result<Self> {
        let n = unary.len();
        let mut out: Vec<Edge> = Vec::with_capacity(edges.len());
        for e in edges {
            if e.s == e.t || e.s >= n || e.t >= n {
                return Err(Error::Invalid(format!(
                    "invalid edge ({}, {}) for {n} vertices",
                    e.s, e.t
                )));
            }
            let e = if e.s < e.t {
                e
            } else {
                let p = e.potential;
                Edge {
                    s: e.t,
                    t: e.s,
                    potential: [p[0], p[2], p[1], p[3]],
                }
            };
            out.push(e);
        }
        out.sort_by_key(|e| (e.s, e.t));
        if let Some(w) = out.windows(2).find(|w| (w[0].s, w[0].t) == (w[1].s, w[1].t)) {
            return Err(Error::Invalid(format!("duplicate edge ({}, {})", w[0].s, w[0].t)));
        }
        let finite = unary.iter().flatten().all(|v| v.is_finite())
            && out.iter().flat_map(|e| e.potential).all(|v| v.is_finite())
            && constant.is_finite();
        if !finite {
            return Err(Error::Invalid("potentials must be finite".into()));
        }
        Ok(MrfModel {
            n_vertices: n,
            unary,
            edges: out,
            constant,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn unary(&self) -> &[[f64; 2]] {
        &self.unary
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn find_edge(&self, s: usize, t: usize) -> Option<usize> {
        let key = (s.min(t), s.max(t));
        self.edges.binary_search_by_key(&key, |e| (e.s, e.t)).ok()
    }

    /// Adds a zero-potential edge if `(s, t)` is absent and returns its index.
    pub fn ensure_edge(&mut self, s: usize, t: usize) -> usize {
        let key = (s.min(t), s.max(t));
        match self.edges.binary_search_by_key(&key, |e| (e.s, e.t)) {
            Ok(i) => i,
            Err(i) => {
                self.edges.insert(
                    i,
                    Edge {
                        s: key.0,
                        t: key.1,
                        potential: [0.0; 4],
                    },
                );
                i
            }
        }
    }

    /// Whether the edge set forms a forest.
    pub fn is_acyclic(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n_vertices).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.s), find(&mut parent, e.t));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    /// Text dump: `u s phi0 phi1` and `e s t phi00 phi01 phi10 phi11` lines.
    /// The vertex count and constant travel in `#` comment lines.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# vertices {}", self.n_vertices)?;
        writeln!(out, "# constant {}", self.constant)?;
        for (s, u) in self.unary.iter().enumerate() {
            writeln!(out, "u {s} {} {}", u[0], u[1])?;
        }
        for e in &self.edges {
            let p = e.potential;
            writeln!(out, "e {} {} {} {} {} {}", e.s, e.t, p[0], p[1], p[2], p[3])?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(reader: R, context: &str) -> Result<Self> {
        let mut n = None;
        let mut constant = 0.0;
        let mut unary: Vec<(usize, [f64; 2])> = Vec::new();
        let mut edges = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::parse(context, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(context, format!("line {}: {msg}", lineno + 1));
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(&e.to_string()));
            let idx = |s: &str| s.parse::<usize>().map_err(|e| bad(&e.to_string()));
            match fields.as_slice() {
                [] => {}
                ["#", "vertices", v] => n = Some(idx(v)?),
                ["#", "constant", v] => constant = num(v)?,
                [first, ..] if first.starts_with('#') => {}
                ["u", s, a, b] => unary.push((idx(s)?, [num(a)?, num(b)?])),
                ["e", s, t, a, b, c, d] => edges.push(Edge {
                    s: idx(s)?,
                    t: idx(t)?,
                    potential: [num(a)?, num(b)?, num(c)?, num(d)?],
                }),
                _ => return Err(bad("unrecognized line")),
            }
        }
        let n = n.unwrap_or_else(|| unary.iter().map(|(s, _)| s + 1).max().unwrap_or(0));
        let mut table = vec![[0.0; 2]; n];
        for (s, u) in unary {
            if s >= n {
                return Err(Error::parse(context, format!("unary for vertex {s} of {n}")));
            }
            table[s] = u;
        }
        MrfModel::new(table, edges, constant)
    }
}

/// Expands the penalized objective into unary and pairwise potentials.
pub fn build_penalized_mrf(qip: &QipModel, beta: f64) -> Result<MrfModel> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Invalid(format!("penalty beta must be > 0, got {beta}")));
    }
    let n = qip.n();
    let k = qip.k as f64;
    let unary = vec![[0.0, beta * (1.0 - 2.0 * k)]; n];
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for s in 0..n {
        for t in (s + 1)..n {
            let on_on = qip.w.symmetric(s, t) + 2.0 * beta;
            if on_on != 0.0 {
                edges.push(Edge {
                    s,
                    t,
                    potential: [0.0, 0.0, 0.0, on_on],
                });
            }
        }
    }
    Ok(MrfModel {
        n_vertices: n,
        unary,
        edges,
        constant: beta * k * k,
    })
}

/// Raises `phi_st(1,1)` by `penalty` for every excluded pair.
pub fn add_exclusions(model: &MrfModel, exclusions: &ProximityPairs, penalty: f64) -> Result<MrfModel> {
    if !(penalty.is_finite() && penalty > 0.0) {
        return Err(Error::Invalid(format!("exclusion penalty must be > 0, got {penalty}")));
    }
    if let Some(max) = exclusions.max_index() {
        if max >= model.n_vertices {
            return Err(Error::Invalid(format!(
                "exclusion references vertex {max} of {}",
                model.n_vertices
            )));
        }
    }
    let mut out = model.clone();
    if exclusions.is_empty() {
        return Ok(out);
    }
    let index: HashMap<(usize, usize), usize> = out.edges.iter().enumerate().map(|(i, e)| ((e.s, e.t), i)).collect();
    let mut fresh = Vec::new();
    for &(s, t) in exclusions.pairs() {
        match index.get(&(s, t)) {
            Some(&i) => out.edges[i].potential[3] += penalty,
            None => fresh.push(Edge {
                s,
                t,
                potential: [0.0, 0.0, 0.0, penalty],
            }),
        }
    }
    if !fresh.is_empty() {
        out.edges.extend(fresh);
        out.edges.sort_by_key(|e| (e.s, e.t));
    }
    Ok(out)
}

/// `sum unary + sum pairwise + constant`.
pub fn mrf_energy(model: &MrfModel, x: &Layout) -> Result<f64> {
    if x.len() != model.n_vertices {
        return Err(Error::DimensionMismatch {
            expected: model.n_vertices,
            got: x.len(),
        });
    }
    Ok(energy_of(model, x.assignment()))
}

pub(crate) fn energy_of(model: &MrfModel, x: &[u8]) -> f64 {
    let unary: f64 = model.unary.iter().zip(x).map(|(u, &xi)| u[xi as usize]).sum();
    let pairwise: f64 = model.edges.iter().map(|e| e.value(x[e.s], x[e.t])).sum();
    unary + pairwise + model.constant
}
