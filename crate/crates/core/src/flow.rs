//! Hamilton's equations `x' = dH/dxi`, `xi' = -dH/dx` integrated in covering-space
//! coordinates with an adaptive Dormand–Prince 5(4) scheme.

use crate::error::{Error, Result};
use crate::quadrature::brent;
use crate::symbols::FourierSymbol;
use crate::torus::LiftedPoint;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth- minus fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State = [f64; 2];

fn rhs(h: &FourierSymbol, y: State) -> State {
    let (gx, gxi) = h.gradient(y[0], y[1]);
    [gxi, -gx]
}

fn axpy(y: State, h: f64, terms: &[(f64, State)]) -> State {
    let mut out = y;
    for &(c, k) in terms {
        out[0] += h * c * k[0];
        out[1] += h * c * k[1];
    }
    out
}

/// One Dormand–Prince step; returns the fifth-order state, its derivative and the error estimate.
fn dp_step(hs: &FourierSymbol, y: State, k1: State, h: f64) -> (State, State, State) {
    let k2 = rhs(hs, axpy(y, h, &[(A21, k1)]));
    let k3 = rhs(hs, axpy(y, h, &[(A31, k1), (A32, k2)]));
    let k4 = rhs(hs, axpy(y, h, &[(A41, k1), (A42, k2), (A43, k3)]));
    let k5 = rhs(hs, axpy(y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]));
    let k6 = rhs(hs, axpy(y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]));
    let y5 = axpy(y, h, &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)]);
    let k7 = rhs(hs, y5);
    let err = [
        h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0]),
        h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1]),
    ];
    (y5, k7, err)
}

/// Adaptive stepper state shared by the public drivers.
struct Stepper<'a> {
    h: &'a FourierSymbol,
    tol: f64,
    lx: f64,
    lxi: f64,
    max_disp: f64,
    t: f64,
    y: State,
    k: State,
    dt: f64,
}

impl<'a> Stepper<'a> {
    fn new(h: &'a FourierSymbol, y0: State, tol: f64) -> Self {
        let (lx, lxi) = (h.geom().ell_x(), h.geom().ell_xi());
        let k = rhs(h, y0);
        let speed = k[0].hypot(k[1]).max(1e-300);
        let max_disp = 0.125 * lx.min(lxi);
        Self { h, tol, lx, lxi, max_disp, t: 0.0, y: y0, k, dt: (0.01 * max_disp / speed).min(1.0) }
    }

    fn err_norm(&self, e: State) -> f64 {
        (e[0].abs() / self.lx).max(e[1].abs() / self.lxi)
    }

    /// Advances by at most `limit` (signed direction given by `dir`).
    fn step(&mut self, dir: f64, limit: f64) -> Result<()> {
        loop {
            let speed = self.k[0].hypot(self.k[1]);
            let mut dt = self.dt.min(limit);
            if speed > 0.0 {
                dt = dt.min(self.max_disp / speed);
            }
            if dt < 1e-13 * self.t.abs().max(1.0) {
                let (gx, gxi) = self.h.gradient(self.y[0], self.y[1]);
                return Err(Error::NearCritical {
                    energy: self.h.eval(self.y[0], self.y[1]),
                    grad_norm: gx.hypot(gxi),
                    threshold: 0.0,
                });
            }
            let (y5, k7, err) = dp_step(self.h, self.y, self.k, dir * dt);
            let en = self.err_norm(err);
            if en <= self.tol {
                self.t += dir * dt;
                self.y = y5;
                self.k = k7;
                let grow = if en == 0.0 { 5.0 } else { (0.9 * (self.tol / en).powf(0.2)).clamp(0.2, 5.0) };
                self.dt = dt * grow;
                return Ok(());
            }
            self.dt = dt * (0.9 * (self.tol / en).powf(0.2)).clamp(0.1, 0.9);
        }
    }
}

/// Sampled trajectory in the covering plane.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<LiftedPoint>,
    /// `|H(end) - H(start)|`.
    pub energy_drift: f64,
}

/// Integrates from `start` (fundamental-domain coordinates) to `t_final`.
///
/// `tol` bounds the per-step local error relative to the torus lengths.
pub fn hamiltonian_flow(symbol: &FourierSymbol, start: (f64, f64), t_final: f64, tol: f64) -> Result<Trajectory> {
    if !t_final.is_finite() || !(tol > 0.0) {
        return Err(Error::Precondition("flow needs finite t_final and tol > 0".into()));
    }
    let geom = *symbol.geom();
    let y0 = [start.0, start.1];
    let e0 = symbol.eval(y0[0], y0[1]);
    let mut s = Stepper::new(symbol, y0, tol);
    let dir = if t_final < 0.0 { -1.0 } else { 1.0 };
    let mut times = vec![0.0];
    let mut points = vec![LiftedPoint::from_covering(y0[0], y0[1], &geom)];
    while (t_final - s.t) * dir > 0.0 {
        let left = (t_final - s.t).abs();
        s.step(dir, left)?;
        if (t_final - s.t).abs() < 1e-14 * t_final.abs().max(1.0) {
            s.t = t_final;
        }
        times.push(s.t);
        points.push(LiftedPoint::from_covering(s.y[0], s.y[1], &geom));
    }
    let drift = (symbol.eval(s.y[0], s.y[1]) - e0).abs();
    Ok(Trajectory { times, points, energy_drift: drift })
}

/// Time of first return of the flow from `start` to `start + shift` (a lattice vector),
/// located by a section through `start` transverse to the flow. `t_guess` seeds the search:
/// crossings before `t_guess / 2` are ignored.
pub fn return_time(symbol: &FourierSymbol, start: (f64, f64), shift: (f64, f64), t_guess: f64, tol: f64) -> Result<f64> {
    let y0 = [start.0, start.1];
    let v0 = rhs(symbol, y0);
    let vn = v0[0].hypot(v0[1]);
    if vn == 0.0 {
        return Err(Error::NearCritical { energy: symbol.eval(y0[0], y0[1]), grad_norm: 0.0, threshold: 0.0 });
    }
    let target = [y0[0] + shift.0, y0[1] + shift.1];
    let section = |y: State| ((y[0] - target[0]) * v0[0] + (y[1] - target[1]) * v0[1]) / vn;
    let near = |y: State| (y[0] - target[0]).hypot(y[1] - target[1]);
    let mut s = Stepper::new(symbol, y0, tol);
    let reach = 0.25 * s.lx.min(s.lxi);
    let t_max = 4.0 * t_guess.max(0.0) + 1.0;
    while s.t < t_max {
        let (t_prev, y_prev, k_prev) = (s.t, s.y, s.k);
        s.step(1.0, f64::INFINITY)?;
        if s.t < 0.5 * t_guess {
            continue;
        }
        let (a, b) = (section(y_prev), section(s.y));
        if a < 0.0 && b >= 0.0 && near(s.y) < reach {
            let dt = s.t - t_prev;
            let tau = brent(|tau| section(dp_step(symbol, y_prev, k_prev, tau).0), 0.0, dt, 1e-15 * dt.max(1e-300))
                .expect("bracketed section crossing");
            return Ok(t_prev + tau);
        }
    }
    Err(Error::Topology(format!("no return to start within t = {t_max}")))
}

/// State after flowing for `t` from covering-space `start`.
pub fn flow_to(symbol: &FourierSymbol, start: (f64, f64), t: f64, tol: f64) -> Result<(f64, f64)> {
    let traj = hamiltonian_flow(symbol, start, t, tol)?;
    let p = traj.points.last().expect("nonempty");
    Ok((p.x, p.xi))
}
