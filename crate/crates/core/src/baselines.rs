//! Reference solvers: exhaustive enumeration, greedy construction and
//! swap local search with seeded restarts.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decode::{coupling_to, repair_swap};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_layout;
use crate::exec;
use crate::farm::{FarmGrid, TurbineSpec};
use crate::mrf::{Layout, QipModel};
use crate::wake::WakeParams;
use crate::wind::WindRose;

/// Default cap on `C(N, K)` for [`brute_force`].
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// Swap moves allowed per repair.
pub const DEFAULT_REPAIR_PASSES: usize = 100_000;

/// What [`brute_force`] optimizes.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Minimize `X^T W X`; the returned value is that energy.
    Surrogate,
    /// Maximize expected farm power; the returned value is that power in kW.
    TruePower {
        grid: &'a FarmGrid,
        rose: &'a WindRose,
        spec: &'a TurbineSpec,
        params: &'a WakeParams,
    },
}

/// `C(n, k)`, saturating.
pub fn combinations(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = match c.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    c
}

pub fn brute_force(qip: &QipModel, objective: Objective<'_>) -> Result<(Layout, f64)> {
    brute_force_with_budget(qip, objective, ENUMERATION_BUDGET)
}

/// Exhaustive search over feasible `K`-subsets. Equal values go to the
/// lexicographically first subset.
pub fn brute_force_with_budget(qip: &QipModel, objective: Objective<'_>, budget: u128) -> Result<(Layout, f64)> {
    let (n, k) = (qip.n(), qip.k);
    let combos = combinations(n, k);
    if combos > budget {
        return Err(Error::BudgetExceeded {
            combinations: combos,
            budget,
        });
    }
    let neighbors = qip.exclusions.neighbors(n);
    let score = |set: &[usize]| -> Result<f64> {
        match objective {
            Objective::Surrogate => Ok(surrogate_of(qip, set)),
            Objective::TruePower {
                grid,
                rose,
                spec,
                params,
            } => {
                let layout = Layout::from_indices(n, set)?;
                Ok(-evaluate_layout(&layout, grid, rose, spec, params)?.expected_power)
            }
        }
    };
    if k == 0 {
        let v = score(&[])?;
        return Ok((Layout::empty(n), finish(objective, v)));
    }
    // split on the first element so branches can run independently
    let branches = exec::map_range(n, |first| -> Result<Option<(f64, Vec<usize>)>> {
        let mut search = Enumeration {
            qip,
            neighbors: &neighbors,
            blocked: vec![0u32; n],
            set: Vec::with_capacity(k),
            best: None,
            surrogate: matches!(objective, Objective::Surrogate),
            score: &score,
        };
        search.push(first);
        search.descend(first + 1, 0.0)?;
        Ok(search.best)
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for branch in branches {
        if let Some(candidate) = branch? {
            if best.as_ref().is_none_or(|b| candidate.0 < b.0) {
                best = Some(candidate);
            }
        }
    }
    let (value, set) = best.ok_or_else(|| Error::Infeasible(format!("no feasible layout with {k} turbines")))?;
    Ok((Layout::from_indices(n, &set)?, finish(objective, value)))
}

fn finish(objective: Objective<'_>, value: f64) -> f64 {
    match objective {
        Objective::Surrogate => value,
        Objective::TruePower { .. } => -value,
    }
}

struct Enumeration<'a, F> {
    qip: &'a QipModel,
    neighbors: &'a [Vec<usize>],
    blocked: Vec<u32>,
    set: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    surrogate: bool,
    score: &'a F,
}

impl<F: Fn(&[usize]) -> Result<f64>> Enumeration<'_, F> {
    fn push(&mut self, i: usize) {
        self.set.push(i);
        for &j in &self.neighbors[i] {
            self.blocked[j] += 1;
        }
    }

    fn pop(&mut self) {
        let i = self.set.pop().expect("pop after push");
        for &j in &self.neighbors[i] {
            self.blocked[j] -= 1;
        }
    }

    /// `energy` is the surrogate of `set` without its newest member's couplings.
    fn descend(&mut self, next: usize, energy: f64) -> Result<()> {
        let newest = *self.set.last().expect("non-empty set");
        if self.blocked[newest] > 0 {
            return Ok(());
        }
        let energy = if self.surrogate {
            let w = &self.qip.w;
            energy
                + self.set[..self.set.len() - 1]
                    .iter()
                    .map(|&i| w.get(i, newest) + w.get(newest, i))
                    .sum::<f64>()
        } else {
            0.0
        };
        let k = self.qip.k;
        if self.set.len() == k {
            let value = if self.surrogate {
                energy
            } else {
                (self.score)(&self.set)?
            };
            if self.best.as_ref().is_none_or(|b| value < b.0) {
                self.best = Some((value, self.set.clone()));
            }
            return Ok(());
        }
        let n = self.qip.n();
        let remaining = k - self.set.len();
        for j in next..=(n - remaining) {
            self.push(j);
            self.descend(j + 1, energy)?;
            self.pop();
        }
        Ok(())
    }
}

fn surrogate_of(qip: &QipModel, set: &[usize]) -> f64 {
    let mut e = 0.0;
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            e += qip.w.get(i, j) + qip.w.get(j, i);
        }
    }
    e
}

/// Adds turbines one at a time, each at the cell with the smallest coupling
/// to those already placed. Equal couplings go to the lower index.
pub fn greedy_construct(qip: &QipModel) -> Result<Layout> {
    let n = qip.n();
    let neighbors = qip.exclusions.neighbors(n);
    let mut layout = Layout::empty(n);
    let mut blocked = vec![false; n];
    let mut coupling = vec![0.0; n];
    for placed in 0..qip.k {
        let pick = (0..n)
            .filter(|&j| !layout.is_on(j) && !blocked[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if coupling[b] <= coupling[j] => Some(b),
                _ => Some(j),
            })
            .ok_or_else(|| Error::Infeasible(format!("greedy placed {placed} of {} turbines", qip.k)))?;
        layout.set(pick, true);
        for &j in &neighbors[pick] {
            blocked[j] = true;
        }
        let row = qip.w.row(pick);
        for (j, c) in coupling.iter_mut().enumerate() {
            *c += row[j] + qip.w.get(j, pick);
        }
    }
    Ok(layout)
}

/// Shuffles the cells with the restart's stream and takes compatible cells
/// in that order. `None` when the draw runs out of compatible cells.
fn random_feasible(qip: &QipModel, neighbors: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Option<Layout> {
    let n = qip.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut layout = Layout::empty(n);
    let mut blocked = vec![false; n];
    let mut placed = 0;
    for i in order {
        if placed == qip.k {
            break;
        }
        if blocked[i] {
            continue;
        }
        layout.set(i, true);
        placed += 1;
        for &j in &neighbors[i] {
            blocked[j] = true;
        }
    }
    (placed == qip.k).then_some(layout)
}

/// Draws tried per random start before falling back to the greedy start.
const START_ATTEMPTS: usize = 64;

/// Swap repair from the greedy layout plus `restarts - 1` seeded random
/// feasible layouts; returns the best layout and its surrogate energy.
/// Restart `r` draws from stream `r` of a generator seeded with `seed`.
pub fn local_search(qip: &QipModel, restarts: usize, seed: u64) -> Result<(Layout, f64)> {
    if restarts == 0 {
        return Err(Error::Invalid("local search needs at least one restart".into()));
    }
    let n = qip.n();
    let greedy = greedy_construct(qip)?;
    let neighbors = qip.exclusions.neighbors(n);
    let results = exec::map_range(restarts, |r| -> Result<(f64, Layout)> {
        let start = if r == 0 {
            greedy.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            (0..START_ATTEMPTS)
                .find_map(|_| random_feasible(qip, &neighbors, &mut rng))
                .unwrap_or_else(|| greedy.clone())
        };
        let layout = repair_swap(&start, qip, DEFAULT_REPAIR_PASSES)?;
        Ok((qip.surrogate_energy(&layout)?, layout))
    });
    let mut best: Option<(f64, Layout)> = None;
    for r in results {
        let (e, l) = r?;
        if best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, l));
        }
    }
    let (e, l) = best.expect("at least one restart");
    Ok((l, e))
}

/// Surrogate energy of a set of cells.
pub fn surrogate_energy_of(qip: &QipModel, cells: &[usize]) -> f64 {
    let c = coupling_to(&qip.w, cells);
    cells.iter().map(|&i| c[i]).sum::<f64>() / 2.0
}
