//! Discretized farm area, turbine description and minimum-separation pairs.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::PowerCurve;

/// Minimum turbine spacing expressed in rotor radii.
pub const SEPARATION_ROTOR_RADII: f64 = 5.0;

/// Piecewise-linear table of `(speed m/s, value)` points, speeds strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedTable {
    points: Vec<(f64, f64)>,
}

impl SpeedTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("speed table is empty".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Invalid(format!("speed table repeats speed {}", w[0].0)));
            }
        }
        if points.iter().any(|(s, v)| !s.is_finite() || !v.is_finite() || *s < 0.0) {
            return Err(Error::Invalid("speed table has non-finite or negative entries".into()));
        }
        Ok(SpeedTable { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn min_speed(&self) -> f64 {
        self.points[0].0
    }

    pub fn max_speed(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Linear interpolation, clamped to the end values outside the table.
    pub fn interpolate(&self, speed: f64) -> f64 {
        let pts = &self.points;
        if speed <= pts[0].0 {
            return pts[0].1;
        }
        let last = pts[pts.len() - 1];
        if speed >= last.0 {
            return last.1;
        }
        let hi = pts.partition_point(|p| p.0 <= speed);
        let (x0, y0) = pts[hi - 1];
        let (x1, y1) = pts[hi];
        if speed == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (speed - x0) / (x1 - x0)
    }
}

/// Reads a `speed_ms,value` CSV.
pub fn load_speed_table(path: impl AsRef<Path>) -> Result<SpeedTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_speed_table(file, &path.display().to_string())
}

pub fn parse_speed_table<R: Read>(reader: R, context: &str) -> Result<SpeedTable> {
    let mut rdr = crate::io::csv_reader(reader);
    crate::io::expect_header(&mut rdr, &["speed_ms", "value"], context)?;
    let mut points = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse(context, e))?;
        let [s, v] = crate::io::parse_floats::<2>(&record, context, line + 2)?;
        points.push((s, v));
    }
    SpeedTable::new(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ThrustModel {
    Constant(f64),
    /// Thrust coefficient by free-stream speed; the turbine sheds no wake outside the table.
    Table(SpeedTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PowerModel {
    /// `0.3 u^3` kW.
    Cubic,
    Curve(PowerCurve),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineSpec {
    pub rotor_radius: f64,
    /// Carried for reporting; the planar wake model does not use it.
    pub hub_height: f64,
    pub thrust: ThrustModel,
    pub power: PowerModel,
    pub rated_power: Option<f64>,
}

impl TurbineSpec {
    pub fn new(
        rotor_radius: f64,
        hub_height: f64,
        thrust: ThrustModel,
        power: PowerModel,
        rated_power: Option<f64>,
    ) -> Result<Self> {
        if !(rotor_radius.is_finite() && rotor_radius > 0.0) {
            return Err(Error::Invalid(format!("rotor radius must be > 0, got {rotor_radius}")));
        }
        match &thrust {
            ThrustModel::Constant(ct) => check_thrust(*ct)?,
            ThrustModel::Table(t) => {
                for &(_, ct) in t.points() {
                    check_thrust(ct)?;
                }
            }
        }
        if let Some(p) = rated_power {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Invalid(format!("rated power must be > 0, got {p}")));
            }
        }
        Ok(TurbineSpec {
            rotor_radius,
            hub_height,
            thrust,
            power,
            rated_power,
        })
    }

    /// The 2 km benchmark turbine: R = 20 m, H = 60 m, C_T = 0.88, cubic power.
    pub fn benchmark() -> Self {
        TurbineSpec::new(20.0, 60.0, ThrustModel::Constant(0.88), PowerModel::Cubic, None)
            .expect("benchmark turbine is valid")
    }

    /// The 5 MW reference turbine: R = 63 m, H = 90 m, tabulated thrust and power.
    pub fn nrel_5mw() -> Self {
        let curve = crate::evaluation::nrel_5mw_power_curve();
        let rated = curve.rated_power();
        TurbineSpec::new(
            63.0,
            90.0,
            ThrustModel::Table(crate::evaluation::nrel_5mw_thrust_table()),
            PowerModel::Curve(curve),
            Some(rated),
        )
        .expect("reference turbine is valid")
    }

    /// Thrust coefficient at a free-stream speed, `None` when the turbine is not operating.
    pub fn thrust_at(&self, speed: f64) -> Option<f64> {
        match &self.thrust {
            ThrustModel::Constant(ct) => Some(*ct),
            ThrustModel::Table(t) => {
                if speed < t.min_speed() || speed > t.max_speed() {
                    None
                } else {
                    Some(t.interpolate(speed))
                }
            }
        }
    }

    pub fn min_separation(&self) -> f64 {
        SEPARATION_ROTOR_RADII * self.rotor_radius
    }
}

fn check_thrust(ct: f64) -> Result<()> {
    if ct > 0.0 && ct < 1.0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "thrust coefficient must be in (0, 1), got {ct}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmGrid {
    cells: Vec<Cell>,
    cell_side: f64,
    bounds: Bounds,
}

impl FarmGrid {
    /// Builds a grid from arbitrary centroids; indices follow input order.
    pub fn from_centroids(centroids: &[(f64, f64)], cell_side: f64) -> Result<Self> {
        if centroids.is_empty() {
            return Err(Error::Invalid("grid has no cells".into()));
        }
        if !(cell_side.is_finite() && cell_side > 0.0) {
            return Err(Error::Invalid(format!("cell side must be > 0, got {cell_side}")));
        }
        let mut seen = HashSet::with_capacity(centroids.len());
        for &(x, y) in centroids {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Invalid("non-finite centroid".into()));
            }
            if !seen.insert(((x + 0.0).to_bits(), (y + 0.0).to_bits())) {
                return Err(Error::Invalid(format!("duplicate centroid ({x}, {y})")));
            }
        }
        let half = cell_side / 2.0;
        let bounds = centroids.iter().fold(
            Bounds {
                min_x: f64::INFINITY,
                min_y: f64::INFINITY,
                max_x: f64::NEG_INFINITY,
                max_y: f64::NEG_INFINITY,
            },
            |b, &(x, y)| Bounds {
                min_x: b.min_x.min(x - half),
                min_y: b.min_y.min(y - half),
                max_x: b.max_x.max(x + half),
                max_y: b.max_y.max(y + half),
            },
        );
        let cells = centroids
            .iter()
            .enumerate()
            .map(|(index, &(x, y))| Cell { index, x, y })
            .collect();
        Ok(FarmGrid {
            cells,
            cell_side,
            bounds,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn centroid(&self, index: usize) -> (f64, f64) {
        let c = &self.cells[index];
        (c.x, c.y)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.centroid(i);
        let (xj, yj) = self.centroid(j);
        (xi - xj).hypot(yi - yj)
    }
}

/// Square farm of side `area_side` split into `cells_per_side^2` square cells.
///
/// Row-major indexing from the south-west corner: index `row * n + col`, with
/// `row` growing northwards and `col` eastwards.
pub fn make_square_grid(area_side: f64, cells_per_side: usize) -> Result<FarmGrid> {
    if cells_per_side == 0 {
        return Err(Error::Invalid("cells_per_side must be >= 1".into()));
    }
    if !(area_side.is_finite() && area_side > 0.0) {
        return Err(Error::Invalid(format!("area side must be > 0, got {area_side}")));
    }
    let side = area_side / cells_per_side as f64;
    let mut centroids = Vec::with_capacity(cells_per_side * cells_per_side);
    for row in 0..cells_per_side {
        for col in 0..cells_per_side {
            centroids.push(((col as f64 + 0.5) * side, (row as f64 + 0.5) * side));
        }
    }
    FarmGrid::from_centroids(&centroids, side)
}

/// Unordered cell pairs closer than the minimum separation, stored with `i < j`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProximityPairs {
    pairs: Vec<(usize, usize)>,
    min_separation: f64,
}

impl ProximityPairs {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Explicit pair list; pairs are canonicalized and deduplicated.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, min_separation: f64) -> Result<Self> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (i, j) in pairs {
            if i == j {
                return Err(Error::Invalid(format!("exclusion pair ({i}, {j}) is a self-pair")));
            }
            out.push((i.min(j), i.max(j)));
        }
        out.sort_unstable();
        out.dedup();
        Ok(ProximityPairs {
            pairs: out,
            min_separation,
        })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.pairs.iter().map(|&(_, j)| j).max()
    }

    /// Per-cell lists of conflicting cells.
    pub fn neighbors(&self, n: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &self.pairs {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Whether the selected cells (given as a 0/1 assignment) violate any pair.
    pub fn violated_by(&self, assignment: &[u8]) -> Option<(usize, usize)> {
        self.pairs
            .iter()
            .copied()
            .find(|&(i, j)| assignment[i] == 1 && assignment[j] == 1)
    }
}

/// All pairs strictly closer than `5 R`; a spacing of exactly `5 R` is allowed.
pub fn proximity_pairs(grid: &FarmGrid, spec: &TurbineSpec) -> ProximityPairs {
    pairs_within(grid, spec.min_separation())
}

pub fn pairs_within(grid: &FarmGrid, min_separation: f64) -> ProximityPairs {
    let mut pairs = Vec::new();
    if min_separation > 0.0 {
        for i in 0..grid.len() {
            for j in (i + 1)..grid.len() {
                if grid.distance(i, j) < min_separation {
                    pairs.push((i, j));
                }
            }
        }
    }
    ProximityPairs { pairs, min_separation }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nrel_like(radius: f64) -> TurbineSpec {
        TurbineSpec::new(radius, 90.0, ThrustModel::Constant(0.8), PowerModel::Cubic, None).unwrap()
    }

    #[test]
    fn square_grid_sizes() {
        let g = make_square_grid(7000.0, 10).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.cell_side(), 700.0);
        let g = make_square_grid(7000.0, 50).unwrap();
        assert_eq!(g.len(), 2500);
        assert_eq!(g.cell_side(), 140.0);
        let g = make_square_grid(2000.0, 10).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(g.cell_side(), 200.0);
        assert!(make_square_grid(2000.0, 0).is_err());
    }

    #[test]
    fn row_major_from_south_west() {
        let g = make_square_grid(2000.0, 10).unwrap();
        assert_eq!(g.centroid(0), (100.0, 100.0));
        assert_eq!(g.centroid(9), (1900.0, 100.0));
        assert_eq!(g.centroid(10), (100.0, 300.0));
        assert_eq!(g.centroid(99), (1900.0, 1900.0));
        let b = g.bounds();
        assert_eq!((b.min_x, b.min_y, b.max_x, b.max_y), (0.0, 0.0, 2000.0, 2000.0));
    }

    #[test]
    fn coarse_grids_need_no_exclusions() {
        let spec = nrel_like(63.0);
        assert!(proximity_pairs(&make_square_grid(7000.0, 10).unwrap(), &spec).is_empty());
        assert!(proximity_pairs(&make_square_grid(7000.0, 20).unwrap(), &spec).is_empty());
    }

    #[test]
    fn fine_grid_exclusion_offsets() {
        let spec = nrel_like(63.0);
        let g = make_square_grid(7000.0, 50).unwrap();
        let p = proximity_pairs(&g, &spec);
        assert_eq!(p.min_separation(), 315.0);
        let set: HashSet<(usize, usize)> = p.pairs().iter().copied().collect();
        // a cell well inside the grid
        let c = 20 * 50 + 20;
        let at = |dc: usize, dr: usize| c + dr * 50 + dc;
        for (dc, dr) in [(1, 0), (1, 1), (2, 0), (2, 1), (0, 2), (1, 2)] {
            assert!(set.contains(&(c, at(dc, dr))), "offset ({dc},{dr}) should be excluded");
        }
        for (dc, dr) in [(2, 2), (3, 0), (0, 3)] {
            assert!(!set.contains(&(c, at(dc, dr))), "offset ({dc},{dr}) should be allowed");
        }
        for &(i, j) in p.pairs() {
            assert!(i < j);
            assert!(g.distance(i, j) < 315.0);
        }
        let mut dedup = p.pairs().to_vec();
        dedup.dedup();
        assert_eq!(dedup.len(), p.len());
    }

    #[test]
    fn zero_separation_is_empty() {
        let g = make_square_grid(1000.0, 5).unwrap();
        assert!(pairs_within(&g, 0.0).is_empty());
    }

    #[test]
    fn exactly_five_radii_is_allowed() {
        let g = FarmGrid::from_centroids(&[(0.0, 0.0), (100.0, 0.0)], 10.0).unwrap();
        let spec = nrel_like(20.0);
        assert!(proximity_pairs(&g, &spec).is_empty());
        let spec = nrel_like(20.0 + 1e-9);
        assert_eq!(proximity_pairs(&g, &spec).len(), 1);
    }

    #[test]
    fn grid_validation() {
        assert!(FarmGrid::from_centroids(&[(0.0, 0.0), (0.0, 0.0)], 1.0).is_err());
        assert!(FarmGrid::from_centroids(&[], 1.0).is_err());
        assert!(FarmGrid::from_centroids(&[(0.0, 0.0)], 0.0).is_err());
    }

    #[test]
    fn turbine_validation() {
        assert!(TurbineSpec::new(0.0, 1.0, ThrustModel::Constant(0.5), PowerModel::Cubic, None).is_err());
        assert!(TurbineSpec::new(1.0, 1.0, ThrustModel::Constant(1.0), PowerModel::Cubic, None).is_err());
        assert!(TurbineSpec::new(1.0, 1.0, ThrustModel::Constant(0.0), PowerModel::Cubic, None).is_err());
        let table = SpeedTable::new(vec![(3.0, 0.8), (25.0, 0.1)]).unwrap();
        let spec = TurbineSpec::new(63.0, 90.0, ThrustModel::Table(table), PowerModel::Cubic, None).unwrap();
        assert_eq!(spec.thrust_at(2.0), None);
        assert_eq!(spec.thrust_at(26.0), None);
        assert!((spec.thrust_at(14.0).unwrap() - 0.45).abs() < 1e-12);
    }

    #[test]
    fn speed_table_interpolation() {
        let t = SpeedTable::new(vec![(4.0, 10.0), (2.0, 0.0), (6.0, 10.0)]).unwrap();
        assert_eq!(t.interpolate(2.0), 0.0);
        assert_eq!(t.interpolate(3.0), 5.0);
        assert_eq!(t.interpolate(4.0), 10.0);
        assert_eq!(t.interpolate(100.0), 10.0);
        assert_eq!(t.interpolate(0.0), 0.0);
        assert!(SpeedTable::new(vec![]).is_err());
        assert!(SpeedTable::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        let parsed = parse_speed_table("speed_ms,value\n# note\n3,1\n4,2\n".as_bytes(), "t").unwrap();
        assert_eq!(parsed.points(), &[(3.0, 1.0), (4.0, 2.0)]);
    }
}
