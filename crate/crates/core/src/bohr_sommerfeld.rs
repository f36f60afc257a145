//! Phase counting, local eigenvalue bracketing and Bohr–Sommerfeld predictions.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbits::{action_difference, match_orbit, orbit_catalog, OrbitCatalog, PeriodicOrbit};
use crate::quadrature::{brent, MonotoneCubic};
use crate::spectral::{local_count, Spectrum};
use crate::symbols::FourierSymbol;
use crate::torus::TorusGeometry;

const TAU: f64 = 2.0 * PI;

/// `z mod 2 pi` in `(-pi, pi]`.
pub fn reduce_2pi(z: f64) -> f64 {
    let mut m = z - TAU * (z / TAU).round();
    if m <= -PI {
        m += TAU;
    } else if m > PI {
        m -= TAU;
    }
    m
}

fn base_phase(orbit: &PeriodicOrbit, hbar: f64) -> f64 {
    // reduce before subtracting the index term: W/hbar can be large
    reduce_2pi(orbit.action_primitive / hbar) - 0.5 * PI * orbit.maslov as f64
}

/// `[W/hbar - (pi/2) sigma + r t]_{2 pi}`.
pub fn reduced_phase(orbit: &PeriodicOrbit, hbar: f64, r: f64) -> f64 {
    reduce_2pi(base_phase(orbit, hbar) + r * orbit.period_primitive)
}

/// `(1/2 pi) sum_p [pi - W/hbar + (pi/2) sigma - r t]_{2 pi}`.
pub fn q_function(catalog: &OrbitCatalog, hbar: f64, r: f64) -> f64 {
    catalog
        .orbits
        .iter()
        .map(|o| reduce_2pi(PI - base_phase(o, hbar) - r * o.period_primitive))
        .sum::<f64>()
        / TAU
}

/// All `r` in `[r_lo, r_hi]` where the reduced phase vanishes; spacing `2 pi / t`.
pub fn omega_roots(orbit: &PeriodicOrbit, hbar: f64, r_lo: f64, r_hi: f64) -> Vec<f64> {
    assert!(r_hi > r_lo, "empty r window");
    let a = base_phase(orbit, hbar);
    let t = orbit.period_primitive;
    let j_lo = ((a + r_lo * t) / TAU).ceil() as i64;
    let j_hi = ((a + r_hi * t) / TAU).floor() as i64;
    (j_lo..=j_hi).map(|j| (TAU * j as f64 - a) / t).filter(|&r| r >= r_lo && r <= r_hi).collect()
}

/// Orbit counts with a root in the inner and outer window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct WindowCounts {
    pub n_min: usize,
    pub n_max: usize,
    /// Some orbit has two or more roots in `[-3r/2, 3r/2]`: `r` is outside the small-`r` regime.
    pub widened: bool,
}

pub fn n_min_max(catalog: &OrbitCatalog, hbar: f64, r: f64) -> WindowCounts {
    let mut c = WindowCounts { n_min: 0, n_max: 0, widened: false };
    for o in &catalog.orbits {
        let outer = omega_roots(o, hbar, -1.5 * r, 1.5 * r);
        if outer.len() > 1 {
            c.widened = true;
        }
        if !outer.is_empty() {
            c.n_max += 1;
        }
        if outer.iter().any(|&x| x.abs() <= 0.5 * r) {
            c.n_min += 1;
        }
    }
    c
}

/// Counts at one `(E, N, r)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuantisationReport {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub n_local: usize,
    pub bracketing_holds: bool,
    pub orbit_count: usize,
    /// `n_local` does not exceed the number of primitive orbits.
    pub orbit_bound_holds: bool,
    /// `false` when the window holds several roots of one orbit.
    pub in_regime: bool,
    pub orbit_roots: Vec<Vec<f64>>,
}

impl QuantisationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn bracketing_check(spec: &Spectrum, catalog: &OrbitCatalog, r: f64) -> Result<QuantisationReport> {
    if !catalog.regular {
        return Err(Error::Regularity { energy: catalog.energy, reason: "catalog is not regular".into() });
    }
    if r <= 0.0 {
        return Err(Error::Precondition("r must be positive".into()));
    }
    let hbar = spec.hbar();
    let counts = n_min_max(catalog, hbar, r);
    let n_local = local_count(spec, catalog.energy, r);
    let orbit_count = catalog.orbits.len();
    Ok(QuantisationReport {
        energy: catalog.energy,
        n: spec.len(),
        r,
        n_min: counts.n_min,
        n_max: counts.n_max,
        n_local,
        bracketing_holds: counts.n_min <= n_local && n_local <= counts.n_max,
        orbit_count,
        orbit_bound_holds: n_local <= orbit_count,
        in_regime: !counts.widened,
        orbit_roots: catalog.orbits.iter().map(|o| omega_roots(o, hbar, -1.5 * r, 1.5 * r)).collect(),
    })
}

/// `E,n_min,n_local,n_max,holds` table.
pub fn sweep_csv(reports: &[QuantisationReport]) -> String {
    let mut s = String::from("E,n_min,n_local,n_max,holds\n");
    for q in reports {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            crate::format::sig17(q.energy),
            q.n_min,
            q.n_local,
            q.n_max,
            q.bracketing_holds
        ));
    }
    s
}

/// One Bohr–Sommerfeld root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prediction {
    pub energy: f64,
    pub family: usize,
    pub k: i64,
    pub maslov: i64,
    /// `W/(2 pi hbar) - sigma/4 - k` at the returned energy.
    pub residual: f64,
}

/// Tabulation density and contour resolution for [`bs_predict`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsOptions {
    pub e_points: usize,
    pub grid_res: usize,
    pub polish_tol: f64,
}

impl Default for BsOptions {
    fn default() -> Self {
        Self { e_points: 33, grid_res: 256, polish_tol: 1e-12 }
    }
}

struct Family {
    orbits: Vec<PeriodicOrbit>,
    // unwrapped actions, one per grid energy
    actions: Vec<f64>,
}

fn tabulate(symbol: &FourierSymbol, energies: &[f64], grid_res: usize) -> Result<Vec<Family>> {
    let geom = *symbol.geom();
    let first = orbit_catalog(symbol, energies[0], grid_res)?;
    let mut fams: Vec<Family> = first
        .orbits
        .into_iter()
        .map(|o| Family { actions: vec![o.action_primitive], orbits: vec![o] })
        .collect();
    for &e in &energies[1..] {
        let cat = orbit_catalog(symbol, e, grid_res)?;
        if cat.orbits.len() != fams.len() {
            return Err(Error::Topology(format!("orbit count changes from {} to {} at E = {e}", fams.len(), cat.orbits.len())));
        }
        let mut taken = vec![false; cat.orbits.len()];
        let mut next = Vec::with_capacity(fams.len());
        for f in &fams {
            let prev = f.orbits.last().unwrap();
            let i = match_orbit(&geom, &cat.orbits, prev)
                .ok_or_else(|| Error::Topology(format!("family lost at E = {e}")))?;
            if taken[i] || cat.orbits[i].maslov != prev.maslov {
                return Err(Error::Topology(format!("ambiguous family continuation at E = {e}")));
            }
            taken[i] = true;
            next.push(i);
        }
        for (f, i) in fams.iter_mut().zip(next) {
            let o = cat.orbits[i].clone();
            let w = f.actions.last().unwrap() + action_difference(&geom, o.action_primitive, f.orbits.last().unwrap().action_primitive);
            f.actions.push(w);
            f.orbits.push(o);
        }
    }
    Ok(fams)
}

/// Energies in `e_window` solving `W(E)/(2 pi hbar) = k + sigma/4` for some family, sorted.
///
/// `k_range = None` takes every integer reached by the family; `Some((lo, hi))` restricts to
/// `lo..=hi` (empty when `lo > hi`). The interpolated root is polished by Newton steps on the
/// actual action using `dW/dE = t`.
pub fn bs_predict(
    symbol: &FourierSymbol,
    e_window: (f64, f64),
    geom: &TorusGeometry,
    k_range: Option<(i64, i64)>,
) -> Result<Vec<Prediction>> {
    bs_predict_with(symbol, e_window, geom, k_range, &BsOptions::default())
}

pub fn bs_predict_with(
    symbol: &FourierSymbol,
    e_window: (f64, f64),
    geom: &TorusGeometry,
    k_range: Option<(i64, i64)>,
    opts: &BsOptions,
) -> Result<Vec<Prediction>> {
    if !symbol.geom().same_lengths(geom) {
        return Err(Error::GeometryMismatch);
    }
    let (lo, hi) = e_window;
    if !(hi > lo) {
        return Err(Error::Precondition("empty energy window".into()));
    }
    if let Some((a, b)) = k_range {
        if a > b {
            return Ok(Vec::new());
        }
    }
    let symbol = symbol.with_geom(*geom)?;
    let hbar = geom.hbar();
    let m = opts.e_points.max(3);
    let energies: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let fams = tabulate(&symbol, &energies, opts.grid_res)?;
    let mut out = Vec::new();
    for (fi, f) in fams.iter().enumerate() {
        let sigma = f.orbits[0].maslov;
        let g: Vec<f64> = f.actions.iter().map(|w| w / (TAU * hbar) - 0.25 * sigma as f64).collect();
        // dW/dE = t > 0, so g increases; refuse otherwise
        if g.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::Topology(format!("action of family {fi} is not monotone in E")));
        }
        let interp = MonotoneCubic::new(energies.clone(), g.clone());
        let (g_lo, g_hi) = (g[0], g[m - 1]);
        let (mut k_lo, mut k_hi) = (g_lo.ceil() as i64, g_hi.floor() as i64);
        if let Some((a, b)) = k_range {
            k_lo = k_lo.max(a);
            k_hi = k_hi.min(b);
        }
        for k in k_lo..=k_hi {
            let kf = k as f64;
            let j = g.partition_point(|&v| v < kf).clamp(1, m - 1);
            let (a, b) = (energies[j - 1], energies[j]);
            let mut e = brent(|x| interp.eval(x) - kf, a, b, 1e-14 * (hi - lo)).unwrap_or(0.5 * (a + b));
            let mut res = f64::NAN;
            let reference = &f.orbits[j - 1];
            let w_ref = f.actions[j - 1];
            for _ in 0..8 {
                let cat = orbit_catalog(&symbol, e, opts.grid_res)?;
                let i = match_orbit(geom, &cat.orbits, reference)
                    .ok_or_else(|| Error::Topology(format!("family {fi} lost at E = {e}")))?;
                let o = &cat.orbits[i];
                let w = w_ref + action_difference(geom, o.action_primitive, reference.action_primitive);
                res = w / (TAU * hbar) - 0.25 * sigma as f64 - kf;
                if res.abs() < opts.polish_tol {
                    break;
                }
                let step = res * TAU * hbar / o.period_primitive;
                e = (e - step).clamp(a, b);
            }
            if e >= lo && e <= hi {
                out.push(Prediction { energy: e, family: fi, k, maslov: sigma, residual: res });
            }
        }
    }
    out.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(out)
}
