//! Rounding solver output to a feasible `K`-turbine layout, and swap repair.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::exec;
use crate::farm::{FarmGrid, ProximityPairs};
use crate::mrf::{Layout, QipModel};
use crate::trws::SolveReport;

/// Greedy top-`k` by `min_marginal(0) - min_marginal(1)`.
pub fn round_top_k(report: &SolveReport, k: usize, exclusions: &ProximityPairs) -> Result<Layout> {
    let advantage: Vec<f64> = report.min_marginals.iter().map(|m| m[0] - m[1]).collect();
    round_scores(&advantage, k, exclusions)
}

/// Selects `k` cells by descending score, skipping cells that conflict with
/// one already chosen. Equal scores go to the lower index.
pub fn round_scores(scores: &[f64], k: usize, exclusions: &ProximityPairs) -> Result<Layout> {
    let n = scores.len();
    if k > n {
        return Err(Error::Infeasible(format!("cannot place {k} turbines in {n} cells")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let neighbors = exclusions.neighbors(n);
    let mut blocked = vec![false; n];
    let mut layout = Layout::empty(n);
    let mut placed = 0;
    for &i in &order {
        if placed == k {
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
    if placed < k {
        return Err(Error::Infeasible(format!(
            "only {placed} mutually compatible cells found for {k} turbines"
        )));
    }
    Ok(layout)
}

/// Best-improvement single-turbine moves on `X^T W X`, at most `max_passes`
/// moves. Returns a layout with no worse surrogate energy.
pub fn repair_swap(layout: &Layout, qip: &QipModel, max_passes: usize) -> Result<Layout> {
    if !qip.is_feasible(layout) {
        return Err(Error::Infeasible("repair needs a feasible starting layout".into()));
    }
    let n = qip.n();
    let neighbors = qip.exclusions.neighbors(n);
    let mut x = layout.assignment().to_vec();
    let mut blocked = vec![0u32; n];
    for i in 0..n {
        if x[i] == 1 {
            for &j in &neighbors[i] {
                blocked[j] += 1;
            }
        }
    }
    for _ in 0..max_passes {
        let selected: Vec<usize> = (0..n).filter(|&i| x[i] == 1).collect();
        if selected.is_empty() || selected.len() == n {
            break;
        }
        let coupling = coupling_to(&qip.w, &selected);
        let energy: f64 = selected.iter().map(|&i| coupling[i]).sum::<f64>() / 2.0;
        let threshold = -1e-12 * energy.abs().max(1e-300);
        let candidates = exec::map_range(selected.len(), |idx| {
            let i = selected[idx];
            let mut best: Option<(f64, usize)> = None;
            for j in 0..n {
                if x[j] == 1 {
                    continue;
                }
                let conflicts = blocked[j] - u32::from(neighbors[i].contains(&j));
                if conflicts > 0 {
                    continue;
                }
                let delta = coupling[j] - qip.w.symmetric(i, j) - coupling[i];
                if best.is_none_or(|(d, _)| delta < d) {
                    best = Some((delta, j));
                }
            }
            best.map(|(d, j)| (d, i, j))
        });
        let best = candidates
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<(f64, usize, usize)>, c| match acc {
                Some(a) if a.0 <= c.0 => Some(a),
                _ => Some(c),
            });
        match best {
            Some((delta, i, j)) if delta < threshold => {
                x[i] = 0;
                x[j] = 1;
                for &m in &neighbors[i] {
                    blocked[m] -= 1;
                }
                for &m in &neighbors[j] {
                    blocked[m] += 1;
                }
            }
            _ => break,
        }
    }
    Layout::from_assignment(x)
}

/// `c(j) = sum_{i in selected} w_ij + w_ji`.
pub(crate) fn coupling_to(w: &crate::wake::InteractionMatrix, selected: &[usize]) -> Vec<f64> {
    let n = w.n();
    let mut c = vec![0.0; n];
    for &i in selected {
        let row = w.row(i);
        for (j, slot) in c.iter_mut().enumerate() {
            *slot += row[j] + w.get(j, i);
        }
    }
    c
}

/// Writes `cell_index,x_m,y_m`, one selected cell per row.
pub fn write_layout_csv<W: Write>(layout: &Layout, grid: &FarmGrid, out: W) -> Result<()> {
    if layout.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: layout.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::parse("layout csv", e);
    w.write_record(["cell_index", "x_m", "y_m"]).map_err(wrap)?;
    for i in layout.selected() {
        let (x, y) = grid.centroid(i);
        w.write_record([i.to_string(), x.to_string(), y.to_string()])
            .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::parse("layout csv", e))?;
    Ok(())
}

/// Reads a layout CSV against `grid`; indices must exist and coordinates must
/// match the cell centroids.
pub fn read_layout_csv<R: Read>(reader: R, context: &str, grid: &FarmGrid) -> Result<Layout> {
    let mut rdr = crate::io::csv_reader(reader);
    crate::io::expect_header(&mut rdr, &["cell_index", "x_m", "y_m"], context)?;
    let mut layout = Layout::empty(grid.len());
    let tol = 1e-6 * grid.cell_side().max(1.0);
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse(context, e))?;
        let [idx, x, y] = crate::io::parse_floats::<3>(&record, context, line + 2)?;
        if idx < 0.0 || idx.fract() != 0.0 || idx as usize >= grid.len() {
            return Err(Error::parse(
                context,
                format!(
                    "line {}: cell index {idx} is not in a grid of {} cells",
                    line + 2,
                    grid.len()
                ),
            ));
        }
        let i = idx as usize;
        let (cx, cy) = grid.centroid(i);
        if (cx - x).abs() > tol || (cy - y).abs() > tol {
            return Err(Error::parse(
                context,
                format!("line {}: cell {i} is at ({cx}, {cy}), file says ({x}, {y})", line + 2),
            ));
        }
        if layout.is_on(i) {
            return Err(Error::parse(
                context,
                format!("line {}: cell {i} listed twice", line + 2),
            ));
        }
        layout.set(i, true);
    }
    Ok(layout)
}
