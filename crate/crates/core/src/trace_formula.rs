//! Semiclassical side of the trace formula and the supporting oscillatory-sum checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::orbits::OrbitCatalog;
use crate::quadrature::{brent, GaussLegendre};
use crate::spectral::{smoothed_counting, Spectrum};
use crate::symbols::FourierSymbol;
use crate::torus::{wrap, TorusGeometry};

pub use crate::test_function::{make_test_function, TestFunction};

/// `k_max` used when none is given: the first repetition whose period leaves the support.
pub fn default_k_max(catalog: &OrbitCatalog, rho: &TestFunction) -> usize {
    match catalog.min_period() {
        Some(t) if t > 0.0 => (rho.support() / t).floor() as usize + 1,
        _ => 1,
    }
}

/// One `(orbit, k)` term of the periodic-orbit sum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrbitTerm {
    pub orbit: usize,
    pub k: i64,
    /// Primitive period of the orbit.
    pub period: f64,
    pub contribution: Complex64,
}

/// Semiclassical right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RhsFragment {
    pub rhs_volume: f64,
    pub orbit_terms: Vec<OrbitTerm>,
    pub rhs_total: f64,
    /// Imaginary part of the term sum, zero up to rounding.
    pub imag_residual: f64,
}

/// `rho_hat(0) vol / 2 pi + sum_{p, 1 <= |k| <= k_max} rho_hat(k t) t / 2 pi e^{i k W/hbar - i pi k sigma/2}`.
///
/// Terms with `|k| t >= T` vanish identically and are omitted.
pub fn rhs_semiclassical(
    catalog: &OrbitCatalog,
    rho: &TestFunction,
    geom: &TorusGeometry,
    k_max: Option<usize>,
) -> Result<RhsFragment> {
    if !catalog.regular {
        return Err(Error::Regularity { energy: catalog.energy, reason: "catalog is not regular".into() });
    }
    let k_max = k_max.unwrap_or_else(|| default_k_max(catalog, rho)) as i64;
    if k_max < 1 {
        return Err(Error::Precondition("k_max must be at least 1".into()));
    }
    let hbar = geom.hbar();
    let rhs_volume = rho.rho_hat(0.0) * catalog.volume / (2.0 * PI);
    let mut terms = Vec::new();
    for (i, o) in catalog.orbits.iter().enumerate() {
        let t = o.period_primitive;
        // reduce W/hbar first; k is an integer so the reduction commutes with k
        let base = wrap(o.action_primitive / hbar, 2.0 * PI);
        for k in (-k_max..=k_max).filter(|&k| k != 0) {
            if (k.abs() as f64) * t >= rho.support() {
                continue;
            }
            let amp = rho.rho_hat(k as f64 * t) * t / (2.0 * PI);
            let phase = k as f64 * base - 0.5 * PI * (k * o.maslov) as f64;
            terms.push(OrbitTerm { orbit: i, k, period: t, contribution: Complex64::from_polar(amp, phase) });
        }
    }
    let sum: Complex64 = terms.iter().map(|t| t.contribution).sum();
    Ok(RhsFragment { rhs_volume, orbit_terms: terms, rhs_total: rhs_volume + sum.re, imag_residual: sum.im })
}

/// Both sides of the trace formula at one `(E, N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceFormulaReport {
    pub energy: f64,
    pub n: usize,
    pub hbar: f64,
    pub lhs: f64,
    pub rhs: RhsFragment,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl TraceFormulaReport {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Term {
            period: f64,
            k: i64,
            re: f64,
            im: f64,
        }
        #[derive(Serialize)]
        struct Out {
            #[serde(rename = "E")]
            e: f64,
            #[serde(rename = "N")]
            n: usize,
            hbar: f64,
            lhs: f64,
            rhs_volume: f64,
            rhs_total: f64,
            abs_error: f64,
            rel_error: f64,
            orbit_terms: Vec<Term>,
        }
        let out = Out {
            e: self.energy,
            n: self.n,
            hbar: self.hbar,
            lhs: self.lhs,
            rhs_volume: self.rhs.rhs_volume,
            rhs_total: self.rhs.rhs_total,
            abs_error: self.abs_error,
            rel_error: self.rel_error,
            orbit_terms: self
                .rhs
                .orbit_terms
                .iter()
                .map(|t| Term { period: t.period, k: t.k, re: t.contribution.re, im: t.contribution.im })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }
}

/// Smoothed counting function against the semiclassical sum.
pub fn compare(
    spec: &Spectrum,
    catalog: &OrbitCatalog,
    rho: &TestFunction,
    e: f64,
    geom: &TorusGeometry,
    k_max: Option<usize>,
) -> Result<TraceFormulaReport> {
    let rhs = rhs_semiclassical(catalog, rho, geom, k_max)?;
    let lhs = smoothed_counting(spec, rho, e);
    let abs_error = (lhs - rhs.rhs_total).abs();
    let rel_error = if lhs != 0.0 { abs_error / lhs.abs() } else { f64::INFINITY };
    Ok(TraceFormulaReport { energy: e, n: spec.len(), hbar: geom.hbar(), lhs, rhs, abs_error, rel_error })
}

/// Refuses symbols outside the smooth class the trace formula applies to.
pub fn require_smooth(symbol: &FourierSymbol) -> Result<()> {
    if !symbol.is_smooth() {
        return Err(Error::NonSmooth(format!("{} is not smooth on the torus", symbol.label())));
    }
    Ok(())
}

/// Simple roots of `H(x) = e` on `[0, l_x)`; errors on a root with `|H'|` at or below `threshold`.
pub fn potential_roots(h1d: &FourierSymbol, e: f64, threshold: f64) -> Result<Vec<f64>> {
    if !h1d.is_position_only() {
        return Err(Error::Precondition("potential_case_rhs needs a symbol depending on x only".into()));
    }
    let lx = h1d.geom().ell_x();
    let samples = 256 * (h1d.max_n().max(1) as usize);
    let f = |x: f64| h1d.eval(x, 0.0) - e;
    let dh = |x: f64| h1d.gradient(x, 0.0).0;
    let step = lx / samples as f64;
    let vals: Vec<f64> = (0..=samples).map(|i| f(i as f64 * step)).collect();
    let mut roots = Vec::new();
    for i in 0..samples {
        let (a, b) = (i as f64 * step, (i + 1) as f64 * step);
        let (fa, fb) = (vals[i], vals[i + 1]);
        // tangency: |f| small at a sample where the slope also nearly vanishes
        if fa.abs() < 4.0 * step * threshold && dh(a).abs() <= threshold {
            return Err(Error::NearCritical { energy: e, grad_norm: dh(a).abs(), threshold });
        }
        if fa == 0.0 || (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            let r = brent(f, a, b, 1e-15 * lx).expect("bracketed root");
            let g = dh(r).abs();
            if g <= threshold {
                return Err(Error::NearCritical { energy: e, grad_norm: g, threshold });
            }
            roots.push(wrap(r, lx));
        }
    }
    Ok(roots)
}

/// Leading-order trace formula for `H = H(x)` in closed form:
/// `sum_{x0} l_xi/(2 pi |H'(x0)|) [rho_hat(0) + sum_{k != 0} rho_hat(k l_xi/|H'|) e^{i k l_xi x0/hbar}]`.
pub fn potential_case_rhs(
    h1d: &FourierSymbol,
    rho: &TestFunction,
    e: f64,
    geom: &TorusGeometry,
    k_max: Option<usize>,
) -> Result<f64> {
    require_smooth(h1d)?;
    let thr = 1e-3 * h1d.gradient_scale();
    let roots = potential_roots(h1d, e, thr)?;
    let hbar = geom.hbar();
    let lxi = geom.ell_xi();
    let mut total = 0.0;
    for &x0 in &roots {
        let hp = h1d.gradient(x0, 0.0).0.abs();
        let tp = lxi / hp;
        let k_lim = k_max.map_or_else(|| (rho.support() / tp).floor() as i64 + 1, |k| k as i64);
        let base = wrap(lxi * x0 / hbar, 2.0 * PI);
        let mut s = rho.rho_hat(0.0);
        for k in 1..=k_lim {
            // +k and -k combine into a cosine
            s += 2.0 * rho.rho_hat(k as f64 * tp) * (k as f64 * base).cos();
        }
        total += tp / (2.0 * PI) * s;
    }
    Ok(total)
}

/// Which torus length plays the role of `l` (the sampled period).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    X,
    Xi,
}

/// Result of [`poisson_check`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoissonReport {
    pub discrete_sum: Complex64,
    pub integral: Complex64,
    pub error: f64,
}

/// Smooth bump `exp(alpha - alpha/(1 - u^2))`, `u = 2t/l - 1`, supported in `(0, l)`.
pub fn bump(l: f64, alpha: f64) -> impl Fn(f64) -> f64 {
    move |t| {
        let u = 2.0 * t / l - 1.0;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (alpha - alpha / (1.0 - u * u)).exp()
        }
    }
}

/// Composite Gauss–Legendre with panel doubling until successive values agree to `tol`.
fn oscillatory_integral<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, start_panels: usize, tol: f64) -> Complex64 {
    let gl = GaussLegendre::standard();
    let eval = |panels: usize| -> Complex64 {
        gl.composite_points(a, b, panels).into_iter().map(|(t, w)| f(t) * w).sum()
    };
    let mut panels = start_panels.max(4);
    let mut prev = eval(panels);
    for _ in 0..12 {
        panels *= 2;
        let cur = eval(panels);
        if (cur - prev).norm() <= tol {
            return cur;
        }
        prev = cur;
    }
    prev
}

/// `(l/N) sum_n a(nl/N) e^{i phi(nl/N)/hbar}` against `int_0^l a(t) e^{i(phi(t) - nu l* t)/hbar} dt`.
///
/// `a` must be supported in `(0, l)`. Requires `phi'(t)` in `((nu-1) l*, (nu+1) l*)` on the
/// support, checked on a sampling grid.
pub fn poisson_check<A, P>(a: A, phi: P, nu: i64, geom: &TorusGeometry, which: Period) -> Result<PoissonReport>
where
    A: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let (l, l_star) = match which {
        Period::X => (geom.ell_x(), geom.ell_xi()),
        Period::Xi => (geom.ell_xi(), geom.ell_x()),
    };
    let n = geom.dim();
    let hbar = geom.hbar();
    let samples = 4096;
    let dh = 1e-6 * l;
    for i in 1..samples {
        let t = l * i as f64 / samples as f64;
        if a(t) == 0.0 {
            continue;
        }
        let d = (phi(t + dh) - phi(t - dh)) / (2.0 * dh);
        if d <= (nu - 1) as f64 * l_star || d >= (nu + 1) as f64 * l_star {
            return Err(Error::Precondition(format!(
                "phase gradient {d} at t = {t} leaves ({}, {})",
                (nu - 1) as f64 * l_star,
                (nu + 1) as f64 * l_star
            )));
        }
    }
    let discrete_sum: Complex64 = (0..n)
        .map(|k| {
            let t = k as f64 * l / n as f64;
            Complex64::from_polar(a(t), phi(t) / hbar)
        })
        .sum::<Complex64>()
        * (l / n as f64);
    let integrand = |t: f64| {
        let v = a(t);
        if v == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(v, (phi(t) - nu as f64 * l_star * t) / hbar)
        }
    };
    // one panel per unit of phase at the start; doubling takes care of the rest
    let integral = oscillatory_integral(integrand, 0.0, l, n.max(16), 1e-16);
    Ok(PoissonReport { discrete_sum, integral, error: (discrete_sum - integral).norm() })
}

/// Bump steepness of the shipped Poisson case.
pub const POISSON_BUMP_ALPHA: f64 = 4.0;
/// Modulation depth of the shipped Poisson phase.
pub const POISSON_PHASE_DEPTH: f64 = 0.3;

/// Shipped smooth case: `a` = bump on `(0, l_x)`, `phi(t) = nu l* t + 0.3 l* sin(2 pi t / l)`.
pub fn poisson_shipped(geom: &TorusGeometry, nu: i64) -> Result<PoissonReport> {
    let (l, ls) = (geom.ell_x(), geom.ell_xi());
    poisson_check(
        bump(l, POISSON_BUMP_ALPHA),
        move |t| nu as f64 * ls * t + POISSON_PHASE_DEPTH * ls * (2.0 * PI * t / l).sin(),
        nu,
        geom,
        Period::X,
    )
}

/// Exact and stationary-phase propagator element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VanVleck {
    pub exact: Complex64,
    pub semiclassical: Complex64,
    pub error: f64,
    /// Sum of stationary-phase amplitudes; the natural scale of the element.
    pub amplitude: f64,
}

/// `U(t)_{mn}` for `H = H(xi)` exactly (DFT diagonalisation) and by stationary phase.
///
/// Stationary points solve `x_m - x_n - nu l_x = t H'(eta)` over all images `nu`; each contributes
/// `sqrt(2 pi hbar/|t H''|)/l_xi e^{i Phi/hbar - i (pi/4) sgn(t H'')}`. A stationary point whose
/// Gaussian width `sqrt(2 pi hbar/|t H''|)` exceeds `l_xi/4` raises a caustic error.
pub fn van_vleck_element(h_xi: &FourierSymbol, geom: &TorusGeometry, t: f64, m: i64, n: i64) -> Result<VanVleck> {
    if !h_xi.is_momentum_only() {
        return Err(Error::Precondition("van_vleck_element needs a symbol depending on xi only".into()));
    }
    if !h_xi.geom().same_lengths(geom) {
        return Err(Error::GeometryMismatch);
    }
    let dim = geom.dim();
    let hbar = geom.hbar();
    let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
    let hh = |eta: f64| h_xi.eval(0.0, eta);
    let h1 = |eta: f64| h_xi.gradient(0.0, eta).1;
    let h2 = |eta: f64| h_xi.hessian(0.0, eta)[1][1];

    let dm = (m - n).rem_euclid(dim as i64) as f64;
    let exact: Complex64 = (0..dim)
        .map(|q| {
            let xi = q as f64 * lxi / dim as f64;
            let ph = 2.0 * PI * q as f64 * dm / dim as f64 - hh(xi) * t / hbar;
            Complex64::from_polar(1.0, ph)
        })
        .sum::<Complex64>()
        / dim as f64;

    if h_xi.gradient_scale() == 0.0 {
        return Err(Error::Caustic("constant symbol: every point is a caustic".into()));
    }
    let width_limit = 0.25 * lxi;
    let samples = 512 * (h_xi.max_m().max(1) as usize);
    let grid: Vec<f64> = (0..=samples).map(|i| lxi * i as f64 / samples as f64).collect();
    let d1: Vec<f64> = grid.iter().map(|&e| h1(e)).collect();
    let (lo, hi) = d1.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let dx = (m - n) as f64 * lx / dim as f64;
    let (nu_lo, nu_hi) = {
        // t H' ranges over [t lo, t hi] (ordered by the sign of t)
        let (a, b) = if t >= 0.0 { (t * lo, t * hi) } else { (t * hi, t * lo) };
        (((dx - b) / lx).floor() as i64 - 1, ((dx - a) / lx).ceil() as i64 + 1)
    };
    let mut sc = Complex64::new(0.0, 0.0);
    let mut amp_sum = 0.0;
    for nu in nu_lo..=nu_hi {
        let c = dx - nu as f64 * lx;
        let g = |eta: f64| t * h1(eta) - c;
        for i in 0..samples {
            let (ga, gb) = (t * d1[i] - c, t * d1[i + 1] - c);
            if ga == 0.0 || ((ga < 0.0) != (gb < 0.0) && gb != 0.0) {
                let eta = brent(g, grid[i], grid[i + 1], 1e-15 * lxi).expect("bracketed");
                let p2 = t * h2(eta);
                let width = (2.0 * PI * hbar / p2.abs()).sqrt();
                if !(width < width_limit) {
                    return Err(Error::Caustic(format!(
                        "stationary point eta = {eta} (nu = {nu}) has |t H''| = {:e}",
                        p2.abs()
                    )));
                }
                let phase = c * eta - t * hh(eta);
                let a = width / lxi;
                sc += Complex64::from_polar(a, phase / hbar - 0.25 * PI * p2.signum());
                amp_sum += a;
            } else {
                // near-tangency between samples: the two roots are about to merge
                let gm = t * h1(0.5 * (grid[i] + grid[i + 1])) - c;
                if gm.abs() < 1e-12 * (t.abs() * (hi - lo)).max(1e-300) {
                    return Err(Error::Caustic(format!("degenerate stationary point near eta = {}", grid[i])));
                }
            }
        }
    }
    Ok(VanVleck { exact, semiclassical: sc, error: (exact - sc).norm(), amplitude: amp_sum })
}

/// RMS over row `m` of `|exact - semiclassical| / amplitude`, restricted to elements whose
/// nearest-image displacement satisfies `|dx| <= ratio * |t| max|H'|` (distance from the fold).
pub fn van_vleck_row_error(h_xi: &FourierSymbol, geom: &TorusGeometry, t: f64, m: i64, ratio: f64) -> Result<(f64, usize)> {
    let dim = geom.dim() as i64;
    let lx = geom.ell_x();
    let lxi = geom.ell_xi();
    let vmax = (0..2048)
        .map(|i| h_xi.gradient(0.0, lxi * i as f64 / 2048.0).1.abs())
        .fold(0.0, f64::max);
    let mut acc = 0.0;
    let mut count = 0usize;
    for n in 0..dim {
        let d = (m - n) as f64 * lx / dim as f64;
        let d = wrap(d + 0.5 * lx, lx) - 0.5 * lx;
        if d.abs() > ratio * t.abs() * vmax {
            continue;
        }
        let v = van_vleck_element(h_xi, geom, t, m, n)?;
        acc += (v.error / v.amplitude).powi(2);
        count += 1;
    }
    if count == 0 {
        return Err(Error::Precondition("no elements inside the displacement window".into()));
    }
    Ok(((acc / count as f64).sqrt(), count))
}
