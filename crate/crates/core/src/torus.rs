//! Phase-space geometry of the torus `R^2 / (l_x Z + l_xi Z)` and covering-space lifts.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Rectangular torus with a fixed Hilbert-space dimension.
///
/// `hbar` is derived from `N = l_x l_xi / (2 pi hbar)` and never set directly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    ell_x: f64,
    ell_xi: f64,
    n: usize,
    hbar: f64,
}

impl TorusGeometry {
    pub fn new(ell_x: f64, ell_xi: f64, n: usize) -> Result<Self> {
        if !(ell_x.is_finite() && ell_x > 0.0) || !(ell_xi.is_finite() && ell_xi > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "lengths must be positive, got ({ell_x}, {ell_xi})"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidGeometry(format!("dimension must be >= 2, got {n}")));
        }
        let hbar = ell_x * ell_xi / (2.0 * PI * n as f64);
        Ok(Self { ell_x, ell_xi, n, hbar })
    }

    /// The default square torus with both periods equal to `2 pi`.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(2.0 * PI, 2.0 * PI, n)
    }

    pub fn ell_x(&self) -> f64 {
        self.ell_x
    }

    pub fn ell_xi(&self) -> f64 {
        self.ell_xi
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Same lengths, different dimension.
    pub fn with_dim(&self, n: usize) -> Result<Self> {
        Self::new(self.ell_x, self.ell_xi, n)
    }

    /// True when both period lengths agree (the dimension may differ).
    pub fn same_lengths(&self, other: &TorusGeometry) -> bool {
        self.ell_x == other.ell_x && self.ell_xi == other.ell_xi
    }

    /// Position grid `x_n = n l_x / N`.
    pub fn grid_points(&self) -> Vec<f64> {
        let step = self.ell_x / self.n as f64;
        (0..self.n).map(|k| k as f64 * step).collect()
    }

    /// Projects a covering-space point into the fundamental domain.
    pub fn project(&self, x: f64, xi: f64) -> (f64, f64) {
        (wrap(x, self.ell_x), wrap(xi, self.ell_xi))
    }
}

/// Reduces `value` into `[0, period)`.
pub fn wrap(value: f64, period: f64) -> f64 {
    let r = value.rem_euclid(period);
    // rem_euclid can round up to exactly `period` for tiny negative inputs
    if r >= period {
        0.0
    } else {
        r
    }
}

/// A covering-space point together with its winding relative to the fundamental domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub x: f64,
    pub xi: f64,
    pub wind_x: i64,
    pub wind_xi: i64,
}

impl LiftedPoint {
    /// Lift of a point already in the fundamental domain (zero winding).
    pub fn from_projected(x: f64, xi: f64, geom: &TorusGeometry) -> Self {
        let (x, xi) = geom.project(x, xi);
        Self { x, xi, wind_x: 0, wind_xi: 0 }
    }

    /// Lift of an arbitrary covering-space point; winding is read off from the coordinates.
    pub fn from_covering(x: f64, xi: f64, geom: &TorusGeometry) -> Self {
        Self {
            x,
            xi,
            wind_x: (x / geom.ell_x()).floor() as i64,
            wind_xi: (xi / geom.ell_xi()).floor() as i64,
        }
    }

    pub fn project(&self, geom: &TorusGeometry) -> (f64, f64) {
        geom.project(self.x, self.xi)
    }
}

/// Largest per-coordinate step, as a fraction of the period, that `unwrap_step` accepts.
pub const MAX_STEP_FRACTION: f64 = 0.25;

fn unwrap_coord(prev: f64, next_projected: f64, period: f64) -> Result<(f64, i64)> {
    let base = (prev / period).floor();
    let mut best = None;
    for shift in -1..=1 {
        let w = base + shift as f64;
        let cand = next_projected + w * period;
        let d = (cand - prev).abs();
        if best.is_none_or(|(_, _, bd)| d < bd) {
            best = Some((cand, w as i64, d));
        }
    }
    let (cand, w, d) = best.expect("three candidates");
    // Steps between a quarter and half a period already break the integrator contract and
    // sit close to the midpoint where two lifts compete; refuse them.
    if d >= MAX_STEP_FRACTION * period {
        return Err(Error::AmbiguousLift { step: d, limit: MAX_STEP_FRACTION * period });
    }
    Ok((cand, w))
}

/// Lifts `next_projected` to the nearest covering-space point of `prev`.
///
/// The step must be shorter than `MAX_STEP_FRACTION` of the period in each coordinate.
pub fn unwrap_step(
    prev: &LiftedPoint,
    next_projected: (f64, f64),
    geom: &TorusGeometry,
) -> Result<LiftedPoint> {
    let (x, wind_x) = unwrap_coord(prev.x, next_projected.0, geom.ell_x())?;
    let (xi, wind_xi) = unwrap_coord(prev.xi, next_projected.1, geom.ell_xi())?;
    Ok(LiftedPoint { x, xi, wind_x, wind_xi })
}
