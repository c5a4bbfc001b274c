//! Jensen top-hat wakes, multi-wake combination and the interaction matrix.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::farm::{FarmGrid, TurbineSpec};
use crate::wind::{WindRose, WindState};

/// Radius the wake cone starts from at the rotor plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WakeExpansion {
    /// Cone starts at the rotor radius `R`: deficit `2a / (1 + alpha d / R)^2`.
    #[default]
    RotorRadius,
    /// Cone starts at the expanded downstream radius `R sqrt((1 - a) / (1 - 2a))`,
    /// the parameterization used by the classic 2 km discrete benchmark.
    DownstreamRadius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WakeParams {
    /// Wake-decay constant.
    pub decay: f64,
    /// Axial induction factor.
    pub induction: f64,
    #[serde(default)]
    pub expansion: WakeExpansion,
}

impl WakeParams {
    pub fn new(decay: f64, induction: f64) -> Result<Self> {
        if !(decay.is_finite() && decay > 0.0) {
            return Err(Error::Invalid(format!("wake decay must be > 0, got {decay}")));
        }
        if !(induction > 0.0 && induction < 0.5) {
            return Err(Error::Invalid(format!(
                "axial induction must be in (0, 0.5), got {induction}"
            )));
        }
        Ok(WakeParams {
            decay,
            induction,
            expansion: WakeExpansion::RotorRadius,
        })
    }

    pub fn from_thrust(decay: f64, c_t: f64) -> Result<Self> {
        WakeParams::new(decay, axial_induction(c_t)?)
    }

    pub fn with_expansion(mut self, expansion: WakeExpansion) -> Self {
        self.expansion = expansion;
        self
    }

    /// Same decay and expansion, induction from the turbine thrust at `speed`.
    /// `None` when the turbine does not operate at that speed.
    pub fn for_state(&self, spec: &TurbineSpec, speed: f64) -> Option<WakeParams> {
        let ct = spec.thrust_at(speed)?;
        let induction = axial_induction(ct).ok()?;
        Some(WakeParams { induction, ..*self })
    }

    /// Cone radius at the rotor plane.
    pub fn initial_radius(&self, rotor_radius: f64) -> f64 {
        match self.expansion {
            WakeExpansion::RotorRadius => rotor_radius,
            WakeExpansion::DownstreamRadius => {
                let a = self.induction;
                rotor_radius * ((1.0 - a) / (1.0 - 2.0 * a)).sqrt()
            }
        }
    }

    /// Deficit at downwind distance `d` and crosswind offset `r` from a wake source.
    #[inline]
    pub fn deficit_at(&self, d: f64, r: f64, initial_radius: f64) -> f64 {
        if d <= 0.0 || r > initial_radius + self.decay * d {
            return 0.0;
        }
        let spread = 1.0 + self.decay * d / initial_radius;
        2.0 * self.induction / (spread * spread)
    }
}

/// Inverts `C_T = 4a(1 - a)` on `a in (0, 0.5)`.
pub fn axial_induction(c_t: f64) -> Result<f64> {
    if !(c_t > 0.0 && c_t < 1.0) {
        return Err(Error::Invalid(format!(
            "thrust coefficient must be in (0, 1), got {c_t}"
        )));
    }
    Ok((1.0 - (1.0 - c_t).sqrt()) / 2.0)
}

/// Fractional speed deficit at `downstream` caused by a turbine at `upstream`
/// for wind blowing FROM `direction` degrees.
pub fn single_wake_deficit(
    upstream: (f64, f64),
    downstream: (f64, f64),
    direction: f64,
    params: &WakeParams,
    rotor_radius: f64,
) -> f64 {
    let frame = Frame::new(direction);
    let (d, r) = frame.separation(upstream, downstream);
    params.deficit_at(d, r, params.initial_radius(rotor_radius))
}

/// Effective speed at `target` with wakes from every other cell in `active`.
pub fn combined_speed(
    active: &[usize],
    target: usize,
    state: &WindState,
    grid: &FarmGrid,
    params: &WakeParams,
    rotor_radius: f64,
) -> f64 {
    let frame = Frame::new(state.direction);
    let r0 = params.initial_radius(rotor_radius);
    let to = grid.centroid(target);
    let sum_sq: f64 = active
        .iter()
        .filter(|&&i| i != target)
        .map(|&i| {
            let (d, r) = frame.separation(grid.centroid(i), to);
            let def = params.deficit_at(d, r, r0);
            def * def
        })
        .sum();
    combine(state.speed, sum_sq)
}

/// `u0 (1 - sqrt(sum of squared deficits))`, clamped at zero.
#[inline]
pub fn combine(free_stream: f64, sum_sq_deficit: f64) -> f64 {
    (free_stream * (1.0 - sum_sq_deficit.sqrt())).max(0.0)
}

/// Rotated frame: `along` points downwind, `cross` is the perpendicular.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    flow: (f64, f64),
}

impl Frame {
    pub(crate) fn new(direction: f64) -> Self {
        Frame {
            flow: crate::wind::flow_vector(direction),
        }
    }

    #[inline]
    pub(crate) fn project(&self, p: (f64, f64)) -> (f64, f64) {
        let (fx, fy) = self.flow;
        (p.0 * fx + p.1 * fy, p.0 * fy - p.1 * fx)
    }

    /// Downwind and absolute crosswind separation from `from` to `to`.
    #[inline]
    pub(crate) fn separation(&self, from: (f64, f64), to: (f64, f64)) -> (f64, f64) {
        let dx = (to.0 - from.0, to.1 - from.1);
        let (along, cross) = self.project(dx);
        (along, cross.abs())
    }
}

/// Dense `n x n` table of probability-weighted squared deficits (m/s).
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl InteractionMatrix {
    /// Row-major entries; the diagonal must be zero and all entries nonnegative.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[i * n + j];
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::Invalid(format!(
                        "w[{i}][{j}] = {v} is not a finite nonnegative value"
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::Invalid(format!("w[{i}][{i}] = {v}, diagonal must be zero")));
                }
            }
        }
        Ok(InteractionMatrix { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        InteractionMatrix {
            n,
            entries: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `w_ij + w_ji`.
    #[inline]
    pub fn symmetric(&self, i: usize, j: usize) -> f64 {
        self.get(i, j) + self.get(j, i)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Whether no pair interacts in both directions.
    pub fn is_one_sided(&self) -> bool {
        (0..self.n).all(|i| ((i + 1)..self.n).all(|j| self.get(i, j) * self.get(j, i) == 0.0))
    }

    pub fn nonzero_count(&self) -> usize {
        self.entries.iter().filter(|&&v| v != 0.0).count()
    }

    /// `X^T W X` for a 0/1 assignment.
    pub fn quadratic_form(&self, assignment: &[u8]) -> f64 {
        let on: Vec<usize> = (0..self.n).filter(|&i| assignment[i] == 1).collect();
        let mut total = 0.0;
        for &i in &on {
            let row = self.row(i);
            for &j in &on {
                total += row[j];
            }
        }
        total
    }

    /// CSV dump: a header row `n`, the dimension, then `n` rows of `n` values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n")?;
        writeln!(out, "{}", self.n)?;
        let mut line = String::new();
        for i in 0..self.n {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, context: &str) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let mut next = |what: &str| -> Result<String> {
            match lines.next() {
                Some(Ok(l)) => Ok(l),
                Some(Err(e)) => Err(Error::parse(context, e)),
                None => Err(Error::parse(context, format!("missing {what}"))),
            }
        };
        if next("header")?.trim() != "n" {
            return Err(Error::parse(context, "expected header row `n`"));
        }
        let n: usize = next("dimension")?
            .trim()
            .parse()
            .map_err(|e| Error::parse(context, format!("dimension: {e}")))?;
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            let line = next("matrix row")?;
            let before = entries.len();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(context, format!("row {i}: `{field}`: {e}")))?;
                entries.push(v);
            }
            if entries.len() - before != n {
                return Err(Error::parse(
                    context,
                    format!("row {i} has {} values, expected {n}", entries.len() - before),
                ));
            }
        }
        InteractionMatrix::from_entries(n, entries)
    }
}

/// Builds `W` with `w_ij = sum_states p * u0 * deficit_{i->j}^2`, `w_ii = 0`.
///
/// `params` supplies the decay constant and cone expansion; the induction
/// factor of each state comes from the turbine thrust at that state's
/// free-stream speed, so `W` stays independent of the layout. States are
/// accumulated in rose order for every entry, which keeps the result
/// identical regardless of how rows are scheduled.
pub fn build_interaction_matrix(
    grid: &FarmGrid,
    rose: &WindRose,
    spec: &TurbineSpec,
    params: &WakeParams,
) -> InteractionMatrix {
    let n = grid.len();
    let states: Vec<StateGeometry> = rose
        .states()
        .iter()
        .filter_map(|s| StateGeometry::new(grid, s, spec, params))
        .collect();
    let mut entries = vec![0.0; n * n];
    exec::for_each_row(&mut entries, n, |i, row| {
        for st in &states {
            let (ai, ci) = (st.along[i], st.cross[i]);
            for (j, slot) in row.iter_mut().enumerate() {
                if j == i {
                    continue;
                }
                let def = st.params.deficit_at(st.along[j] - ai, (st.cross[j] - ci).abs(), st.r0);
                if def != 0.0 {
                    *slot += st.weight * def * def;
                }
            }
        }
    });
    InteractionMatrix { n, entries }
}

/// Per-state projected coordinates shared by the matrix build and evaluation.
pub(crate) struct StateGeometry {
    pub(crate) params: WakeParams,
    pub(crate) r0: f64,
    /// `probability * u0`.
    pub(crate) weight: f64,
    pub(crate) along: Vec<f64>,
    pub(crate) cross: Vec<f64>,
}

impl StateGeometry {
    pub(crate) fn new(grid: &FarmGrid, state: &WindState, spec: &TurbineSpec, template: &WakeParams) -> Option<Self> {
        let params = template.for_state(spec, state.speed)?;
        let frame = Frame::new(state.direction);
        let (along, cross) = grid.cells().iter().map(|c| frame.project((c.x, c.y))).unzip();
        Some(StateGeometry {
            params,
            r0: params.initial_radius(spec.rotor_radius),
            weight: state.probability * state.speed,
            along,
            cross,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm::make_square_grid;
    use crate::wind::{builtin_wr1, uniform_rose};

    fn params() -> WakeParams {
        WakeParams::from_thrust(0.1, 0.88).unwrap()
    }

    #[test]
    fn induction_values() {
        let a = axial_induction(0.88).unwrap();
        assert!((a - 0.326795).abs() < 1e-6);
        assert!((4.0 * a * (1.0 - a) - 0.88).abs() < 1e-12);
        assert!((axial_induction(0.75).unwrap() - 0.25).abs() < 1e-15);
        assert!(axial_induction(1e-12).unwrap() < 1e-11);
        assert!(axial_induction(0.0).is_err());
        assert!(axial_induction(1.0).is_err());
    }

    #[test]
    fn inline_deficit() {
        // wind from the north: upstream is the northern point
        let d = single_wake_deficit((0.0, 200.0), (0.0, 0.0), 0.0, &params(), 20.0);
        assert!((d - 0.163397).abs() < 1e-6);
        // reversed roles: downstream point lies upwind
        assert_eq!(single_wake_deficit((0.0, 0.0), (0.0, 200.0), 0.0, &params(), 20.0), 0.0);
        // outside the cone: 45 m > 20 + 0.1 * 200
        assert_eq!(
            single_wake_deficit((0.0, 200.0), (45.0, 0.0), 0.0, &params(), 20.0),
            0.0
        );
        // inside the cone at the same distance the deficit is unchanged (top-hat)
        let inside = single_wake_deficit((0.0, 200.0), (39.0, 0.0), 0.0, &params(), 20.0);
        assert!((inside - d).abs() < 1e-15);
    }

    #[test]
    fn deficit_direction_rotation() {
        // wind from the west flows east
        let d = single_wake_deficit((0.0, 0.0), (200.0, 0.0), 270.0, &params(), 20.0);
        assert!((d - 0.163397).abs() < 1e-6);
    }

    #[test]
    fn deficit_decreases_downwind() {
        let p = params();
        let mut prev = f64::INFINITY;
        for k in 1..50 {
            let d = p.deficit_at(k as f64 * 37.0, 0.0, 20.0);
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn downstream_radius_expansion() {
        let p = params().with_expansion(WakeExpansion::DownstreamRadius);
        let a = p.induction;
        let r1 = 20.0 * ((1.0 - a) / (1.0 - 2.0 * a)).sqrt();
        assert!((p.initial_radius(20.0) - r1).abs() < 1e-12);
        assert!((r1 - 27.8813).abs() < 1e-3);
        let d = single_wake_deficit((0.0, 200.0), (0.0, 0.0), 0.0, &p, 20.0);
        let expected = 2.0 * a / (1.0 + 0.1 * 200.0 / r1).powi(2);
        assert!((d - expected).abs() < 1e-15);
    }

    #[test]
    fn combined_speeds() {
        let grid =
            FarmGrid::from_centroids(&[(0.0, 400.0), (100.0, 400.0), (0.0, 200.0), (100.0, 200.0)], 50.0).unwrap();
        let wr1 = builtin_wr1().states()[0];
        let p = params();
        // nothing upstream
        assert_eq!(combined_speed(&[2], 2, &wr1, &grid, &p, 20.0), 12.0);
        let single = combined_speed(&[0, 2], 2, &wr1, &grid, &p, 20.0);
        assert!((single - 10.0392).abs() < 1e-4);
        let def = single_wake_deficit((0.0, 400.0), (0.0, 200.0), 0.0, &p, 20.0);
        assert!((single - 12.0 * (1.0 - def)).abs() < 1e-12);
    }

    #[test]
    fn two_wakes_combine_in_quadrature() {
        // two sources 200 m upwind of the target, offset sideways inside both cones
        let grid = FarmGrid::from_centroids(&[(-10.0, 200.0), (10.0, 200.0), (0.0, 0.0)], 1.0).unwrap();
        let wr1 = builtin_wr1().states()[0];
        let u = combined_speed(&[0, 1, 2], 2, &wr1, &grid, &params(), 20.0);
        assert!((u - 9.2271).abs() < 1e-3);
    }

    #[test]
    fn wr1_pair_entry() {
        let grid = FarmGrid::from_centroids(&[(0.0, 200.0), (0.0, 0.0)], 100.0).unwrap();
        let w = build_interaction_matrix(&grid, &builtin_wr1(), &TurbineSpec::benchmark(), &params());
        let a = (1.0 - 0.12f64.sqrt()) / 2.0;
        let def = 2.0 * a / 4.0;
        assert!((w.get(0, 1) - 12.0 * def * def).abs() < 1e-12);
        assert!((w.get(0, 1) - 0.320385).abs() < 1e-6);
        assert_eq!(w.get(1, 0), 0.0);
        assert_eq!(w.get(0, 0), 0.0);
    }

    #[test]
    fn uniform_rose_gives_symmetric_matrix() {
        let grid = make_square_grid(600.0, 3).unwrap();
        let w = build_interaction_matrix(
            &grid,
            &uniform_rose(12.0, 4).unwrap(),
            &TurbineSpec::benchmark(),
            &params(),
        );
        assert!(w.max_asymmetry() < 1e-12);
        assert!(w.nonzero_count() > 0);
        let w36 = build_interaction_matrix(
            &grid,
            &uniform_rose(12.0, 36).unwrap(),
            &TurbineSpec::benchmark(),
            &params(),
        );
        assert!(w36.max_asymmetry() < 1e-12);
    }

    #[test]
    fn wr1_matrix_is_one_sided() {
        let grid = make_square_grid(2000.0, 10).unwrap();
        let w = build_interaction_matrix(&grid, &builtin_wr1(), &TurbineSpec::benchmark(), &params());
        assert!(w.is_one_sided());
        for i in 0..w.n() {
            assert_eq!(w.get(i, i), 0.0);
        }
        // northern rows wake southern ones only
        for i in 0..w.n() {
            for j in 0..w.n() {
                if w.get(i, j) > 0.0 {
                    assert!(grid.centroid(i).1 > grid.centroid(j).1);
                }
            }
        }
    }

    #[test]
    fn csv_dump_roundtrip() {
        let grid = make_square_grid(600.0, 3).unwrap();
        let w = build_interaction_matrix(
            &grid,
            &uniform_rose(12.0, 8).unwrap(),
            &TurbineSpec::benchmark(),
            &params(),
        );
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let back = InteractionMatrix::read_csv(buf.as_slice(), "t").unwrap();
        assert_eq!(back, w);
        assert!(InteractionMatrix::read_csv("n\n2\n0,1\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn from_entries_validation() {
        assert!(InteractionMatrix::from_entries(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(InteractionMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(InteractionMatrix::from_entries(2, vec![0.0, -1.0, 1.0, 0.0]).is_err());
        assert!(InteractionMatrix::from_entries(2, vec![0.0]).is_err());
    }
}
