//! True farm power under the full wake combination, AEP and run comparison.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::farm::{parse_speed_table, FarmGrid, PowerModel, SpeedTable, TurbineSpec};
use crate::mrf::Layout;
use crate::wake::{combine, StateGeometry, WakeParams};
use crate::wind::WindRose;

/// Power table in kW by speed, zero outside `[cut_in, cut_out]` and held at
/// the last knot between the last knot and `cut_out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    table: SpeedTable,
    cut_in: f64,
    cut_out: f64,
}

impl PowerCurve {
    pub fn new(table: SpeedTable, cut_in: f64, cut_out: f64) -> Result<Self> {
        if !(cut_in >= 0.0 && cut_out > cut_in) {
            return Err(Error::Invalid(format!(
                "power curve needs 0 <= cut-in < cut-out, got {cut_in}, {cut_out}"
            )));
        }
        if table.points().iter().any(|&(_, p)| p < 0.0) {
            return Err(Error::Invalid("power curve has negative power".into()));
        }
        Ok(PowerCurve { table, cut_in, cut_out })
    }

    /// Cut-in at the first knot, cut-out at the last.
    pub fn from_table(table: SpeedTable) -> Result<Self> {
        let (lo, hi) = (table.min_speed(), table.max_speed());
        PowerCurve::new(table, lo, hi)
    }

    pub fn table(&self) -> &SpeedTable {
        &self.table
    }

    pub fn cut_in(&self) -> f64 {
        self.cut_in
    }

    pub fn cut_out(&self) -> f64 {
        self.cut_out
    }

    pub fn rated_power(&self) -> f64 {
        self.table.points().iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

pub fn load_power_curve(path: impl AsRef<Path>) -> Result<PowerCurve> {
    PowerCurve::from_table(crate::farm::load_speed_table(path)?)
}

/// `0.3 u^3` kW.
pub fn power_cubic(u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Invalid(format!("wind speed must be >= 0, got {u}")));
    }
    Ok(0.3 * u * u * u)
}

pub fn power_from_curve(curve: &PowerCurve, u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Invalid(format!("wind speed must be >= 0, got {u}")));
    }
    if u < curve.cut_in || u > curve.cut_out {
        return Ok(0.0);
    }
    Ok(curve.table.interpolate(u))
}

/// Power of one turbine at effective speed `u`.
pub fn turbine_power(spec: &TurbineSpec, u: f64) -> Result<f64> {
    match &spec.power {
        PowerModel::Cubic => power_cubic(u),
        PowerModel::Curve(c) => power_from_curve(c, u),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Farm power in kW for each rose state, in rose order.
    pub state_power: Vec<f64>,
    /// Probability-weighted farm power, kW.
    pub expected_power: f64,
    /// `expected_power * observation_hours`, kWh.
    pub aep: f64,
    pub observation_hours: f64,
    /// Selected cells in index order; columns of `effective_speeds`.
    pub turbines: Vec<usize>,
    /// Per state, effective speed at each selected turbine.
    pub effective_speeds: Vec<Vec<f64>>,
}

/// Recomputes every turbine's effective speed with the nonlinear
/// root-sum-square combination for each state.
pub fn evaluate_layout(
    layout: &Layout,
    grid: &FarmGrid,
    rose: &WindRose,
    spec: &TurbineSpec,
    params: &WakeParams,
) -> Result<EvaluationReport> {
    if layout.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: layout.len(),
        });
    }
    let active = layout.selected();
    let per_state: Vec<Result<(f64, Vec<f64>)>> = exec::map_range(rose.len(), |q| {
        let state = &rose.states()[q];
        let speeds: Vec<f64> = match StateGeometry::new(grid, state, spec, params) {
            Some(geo) => active
                .iter()
                .map(|&j| {
                    let sum_sq: f64 = active
                        .iter()
                        .filter(|&&i| i != j)
                        .map(|&i| {
                            let def = geo.params.deficit_at(
                                geo.along[j] - geo.along[i],
                                (geo.cross[j] - geo.cross[i]).abs(),
                                geo.r0,
                            );
                            def * def
                        })
                        .sum();
                    combine(state.speed, sum_sq)
                })
                .collect(),
            // turbines idle at this speed shed no wake
            None => vec![state.speed; active.len()],
        };
        let mut power = 0.0;
        for &u in &speeds {
            power += turbine_power(spec, u)?;
        }
        Ok((power, speeds))
    });
    let mut state_power = Vec::with_capacity(rose.len());
    let mut effective_speeds = Vec::with_capacity(rose.len());
    let mut expected_power = 0.0;
    for (state, result) in rose.states().iter().zip(per_state) {
        let (power, speeds) = result?;
        expected_power += state.probability * power;
        state_power.push(power);
        effective_speeds.push(speeds);
    }
    let hours = rose.observation_hours();
    Ok(EvaluationReport {
        state_power,
        expected_power,
        aep: expected_power * hours,
        observation_hours: hours,
        turbines: active,
        effective_speeds,
    })
}

/// Outcome of one solver run, as needed for comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub expected_power: f64,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// `100 (P_a - P_b) / P_b`; positive when `a` produces more.
    pub percent_difference: f64,
    /// `time_b / time_a`; above 1 when `a` is faster.
    pub time_ratio: f64,
}

pub fn compare(a: &RunRecord, b: &RunRecord) -> Result<Comparison> {
    if b.expected_power == 0.0 {
        return Err(Error::Invalid(format!("`{}` has zero expected power", b.label)));
    }
    if a.wall_time == 0.0 {
        return Err(Error::Invalid(format!("`{}` has zero wall time", a.label)));
    }
    Ok(Comparison {
        percent_difference: 100.0 * (a.expected_power - b.expected_power) / b.expected_power,
        time_ratio: b.wall_time / a.wall_time,
    })
}

const NREL_POWER: &str = include_str!("../data/nrel5mw_power.csv");
const NREL_THRUST: &str = include_str!("../data/nrel5mw_thrust.csv");

/// Bundled 5 MW reference power curve: cut-in 3 m/s, rated 11.4 m/s, cut-out 25 m/s.
pub fn nrel_5mw_power_curve() -> PowerCurve {
    let table = parse_speed_table(NREL_POWER.as_bytes(), "nrel5mw_power.csv").expect("bundled curve parses");
    PowerCurve::from_table(table).expect("bundled curve is valid")
}

/// Bundled 5 MW reference thrust coefficients over the operating range.
pub fn nrel_5mw_thrust_table() -> SpeedTable {
    parse_speed_table(NREL_THRUST.as_bytes(), "nrel5mw_thrust.csv").expect("bundled thrust table parses")
}
