//! Wind roses: discrete joint distributions over free-stream speed and direction.
//!
//! Directions use the meteorological convention: the bearing the wind blows
//! FROM, in degrees clockwise from north. Wakes therefore extend towards
//! `direction + 180`.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hours in a (non-leap) year, the default observation period.
pub const HOURS_PER_YEAR: f64 = 8760.0;

/// Tolerance accepted on the probability sum of loaded roses before renormalization.
pub const LOAD_SUM_TOLERANCE: f64 = 1e-6;

const BUNDLED_WR36: &str = include_str!("../data/wr36.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindState {
    /// Free-stream speed in m/s.
    pub speed: f64,
    /// FROM-direction in degrees, `[0, 360)`.
    pub direction: f64,
    /// Fraction of the observation period spent in this state.
    pub probability: f64,
}

impl WindState {
    pub fn new(speed: f64, direction: f64, probability: f64) -> Result<Self> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::Invalid(format!("wind speed must be > 0, got {speed}")));
        }
        if !(direction.is_finite() && (0.0..360.0).contains(&direction)) {
            return Err(Error::Invalid(format!(
                "wind direction must be in [0, 360), got {direction}"
            )));
        }
        if !(probability.is_finite() && (0.0..=1.0).contains(&probability)) {
            return Err(Error::Invalid(format!(
                "state probability must be in [0, 1], got {probability}"
            )));
        }
        Ok(WindState {
            speed,
            direction,
            probability,
        })
    }

    /// Unit vector of the flow (the direction the air moves TO), as `(x, y)`
    /// with `x` east and `y` north.
    pub fn flow_vector(&self) -> (f64, f64) {
        flow_vector(self.direction)
    }
}

/// Unit vector the air moves along for wind blowing FROM `direction` degrees.
///
/// Opposite directions (when `direction + 180` is exact) give exactly negated vectors and the compass points
/// give exact axis vectors, so reversed cell pairs see identical geometry.
pub fn flow_vector(direction: f64) -> (f64, f64) {
    let d = direction.rem_euclid(360.0);
    if d >= 180.0 {
        let (x, y) = flow_vector(d - 180.0);
        return (-x, -y);
    }
    if d >= 90.0 {
        let (s, c) = sin_cos_deg(d - 90.0);
        return (-c, s);
    }
    let (s, c) = sin_cos_deg(d);
    (-s, -c)
}

fn sin_cos_deg(d: f64) -> (f64, f64) {
    if d == 0.0 {
        (0.0, 1.0)
    } else {
        d.to_radians().sin_cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindRose {
    states: Vec<WindState>,
    observation_hours: f64,
}

impl WindRose {
    /// Validates the states and renormalizes probabilities that sum to one
    /// within [`LOAD_SUM_TOLERANCE`].
    pub fn new(states: Vec<WindState>, observation_hours: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Invalid("wind rose has no states".into()));
        }
        if !(observation_hours.is_finite() && observation_hours > 0.0) {
            return Err(Error::Invalid(format!(
                "observation hours must be > 0, got {observation_hours}"
            )));
        }
        let mut seen = HashSet::with_capacity(states.len());
        for s in &states {
            WindState::new(s.speed, s.direction, s.probability)?;
            if !seen.insert((s.speed.to_bits(), s.direction.to_bits())) {
                return Err(Error::DuplicateState {
                    speed: s.speed,
                    direction: s.direction,
                });
            }
        }
        let sum: f64 = states.iter().map(|s| s.probability).sum();
        if (sum - 1.0).abs() > LOAD_SUM_TOLERANCE {
            return Err(Error::ProbabilitySum { sum });
        }
        let states = states
            .into_iter()
            .map(|s| WindState {
                probability: s.probability / sum,
                ..s
            })
            .collect();
        Ok(WindRose {
            states,
            observation_hours,
        })
    }

    pub fn states(&self) -> &[WindState] {
        &self.states
    }

    pub fn observation_hours(&self) -> f64 {
        self.observation_hours
    }

    pub fn with_observation_hours(mut self, hours: f64) -> Result<Self> {
        if !(hours.is_finite() && hours > 0.0) {
            return Err(Error::Invalid(format!("observation hours must be > 0, got {hours}")));
        }
        self.observation_hours = hours;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_probability(&self) -> f64 {
        self.states.iter().map(|s| s.probability).sum()
    }

    /// Number of distinct directions present in the rose.
    pub fn direction_count(&self) -> usize {
        let dirs: HashSet<u64> = self.states.iter().map(|s| s.direction.to_bits()).collect();
        dirs.len()
    }

    /// Direction carrying the largest total probability (first on ties).
    pub fn dominant_direction(&self) -> f64 {
        let mut totals: Vec<(f64, f64)> = Vec::new();
        for s in &self.states {
            match totals.iter_mut().find(|(d, _)| *d == s.direction) {
                Some((_, p)) => *p += s.probability,
                None => totals.push((s.direction, s.probability)),
            }
        }
        totals
            .into_iter()
            .fold(
                (0.0, f64::NEG_INFINITY),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            )
            .0
    }

    /// Probability-weighted mean of `speed^3`, useful for sanity checks of the
    /// unwaked cubic-law power.
    pub fn mean_cubed_speed(&self) -> f64 {
        self.states.iter().map(|s| s.probability * s.speed.powi(3)).sum()
    }
}

/// The unidirectional benchmark resource: 12 m/s from the north, all year.
pub fn builtin_wr1() -> WindRose {
    uniform_rose(12.0, 1).expect("single-direction rose is valid")
}

/// The bundled 3-speed, 36-direction benchmark resource (see `data/wr36.csv`).
pub fn builtin_wr36() -> WindRose {
    parse_rose(BUNDLED_WR36.as_bytes(), "bundled wr36.csv").expect("bundled rose is valid")
}

/// `n_directions` equally spaced directions starting at north, equal probability.
pub fn uniform_rose(speed: f64, n_directions: usize) -> Result<WindRose> {
    if n_directions == 0 {
        return Err(Error::Invalid("uniform rose needs at least one direction".into()));
    }
    let p = 1.0 / n_directions as f64;
    let step = 360.0 / n_directions as f64;
    let states = (0..n_directions)
        .map(|k| WindState::new(speed, k as f64 * step, p))
        .collect::<Result<Vec<_>>>()?;
    WindRose::new(states, HOURS_PER_YEAR)
}

/// Reads a rose CSV (`speed_ms,direction_deg,probability`; `#` comment lines allowed).
pub fn load_rose(path: impl AsRef<Path>) -> Result<WindRose> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_rose(file, &path.display().to_string())
}

pub fn parse_rose<R: Read>(reader: R, context: &str) -> Result<WindRose> {
    let mut rdr = crate::io::csv_reader(reader);
    crate::io::expect_header(&mut rdr, &["speed_ms", "direction_deg", "probability"], context)?;
    let mut states = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse(context, e))?;
        let fields = crate::io::parse_floats::<3>(&record, context, line + 2)?;
        states.push(WindState::new(fields[0], fields[1], fields[2])?);
    }
    WindRose::new(states, HOURS_PER_YEAR)
}

pub fn write_rose<W: std::io::Write>(rose: &WindRose, mut out: W) -> std::io::Result<()> {
    writeln!(out, "speed_ms,direction_deg,probability")?;
    for s in rose.states() {
        writeln!(out, "{},{},{}", s.speed, s.direction, s.probability)?;
    }
    Ok(())
}
