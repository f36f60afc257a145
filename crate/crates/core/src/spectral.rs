//! Exact diagonalisation and spectral sums.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::quadrature::GaussLegendre;
use crate::quantize::HermitianOperator;
use crate::test_function::TestFunction;
use crate::torus::TorusGeometry;

/// Default relative tolerance used to group degenerate eigenvalues.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 10_000;

/// Sorted eigenvalues with multiplicity groups.
#[derive(Clone, Debug)]
pub struct Spectrum {
    geom: TorusGeometry,
    eigenvalues: Vec<f64>,
    /// Group index of each eigenvalue; consecutive equal values share a group.
    group: Vec<usize>,
    multiplicities: Vec<usize>,
    residual: f64,
    eigenvectors: Option<DMatrix<Complex64>>,
}

fn group_values(values: &[f64], tol_abs: f64) -> (Vec<usize>, Vec<usize>) {
    let mut group = Vec::with_capacity(values.len());
    let mut mult: Vec<usize> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if i > 0 && v - values[i - 1] <= tol_abs {
            *mult.last_mut().unwrap() += 1;
        } else {
            mult.push(1);
        }
        group.push(mult.len() - 1);
    }
    (group, mult)
}

impl Spectrum {
    /// Spectrum from known values (any count); the geometry supplies `hbar`.
    pub fn from_values(geom: TorusGeometry, mut values: Vec<f64>, degeneracy_tol: f64) -> Self {
        values.sort_by(|a, b| a.total_cmp(b));
        let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let (group, multiplicities) = group_values(&values, degeneracy_tol * scale);
        Self { geom, eigenvalues: values, group, multiplicities, residual: 0.0, eigenvectors: None }
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn hbar(&self) -> f64 {
        self.geom.hbar()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Sizes of the degeneracy groups in increasing order of value.
    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// `(representative value, multiplicity)` per group.
    pub fn groups(&self) -> Vec<(f64, usize)> {
        let mut out = Vec::with_capacity(self.multiplicities.len());
        let mut i = 0;
        for &m in &self.multiplicities {
            out.push((self.eigenvalues[i], m));
            i += m;
        }
        out
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Columns are orthonormal eigenvectors in the order of `eigenvalues`, if requested.
    pub fn eigenvectors(&self) -> Option<&DMatrix<Complex64>> {
        self.eigenvectors.as_ref()
    }

    /// CSV with columns `index,eigenvalue,multiplicity_group`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,multiplicity_group\n");
        for (i, (&v, &g)) in self.eigenvalues.iter().zip(&self.group).enumerate() {
            writeln!(s, "{i},{},{g}", sig17(v)).unwrap();
        }
        s
    }
}

/// Full Hermitian eigendecomposition.
///
/// Real symmetric inputs take the real solver. Values within `degeneracy_tol * ||A||` are
/// grouped. The residual `max ||A v - lambda v|| / ||A||` is always computed.
pub fn eigendecompose(a: &HermitianOperator, degeneracy_tol: f64, keep_vectors: bool) -> Result<Spectrum> {
    let m = a.entries();
    let n = m.nrows();
    let fail = |reason: &str| Error::Eigensolver { label: a.label().to_string(), reason: reason.to_string() };
    let is_real = m.iter().all(|z| z.im == 0.0);
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if is_real {
        let re = m.map(|z| z.re);
        let eig = SymmetricEigen::try_new(re, f64::EPSILON, MAX_SWEEPS).ok_or_else(|| fail("no convergence"))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_SWEEPS).ok_or_else(|| fail("no convergence"))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite eigenvalue"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);

    let norm = sorted.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let av = m * &vecs;
    let mut resid = 0.0f64;
    for c in 0..n {
        let mut s = 0.0;
        for r in 0..n {
            s += (av[(r, c)] - vecs[(r, c)] * sorted[c]).norm_sqr();
        }
        resid = resid.max(s.sqrt());
    }
    let residual = if norm > 0.0 { resid / norm } else { resid };
    let (group, multiplicities) = group_values(&sorted, degeneracy_tol * norm);
    Ok(Spectrum {
        geom: *a.geom(),
        eigenvalues: sorted,
        group,
        multiplicities,
        residual,
        eigenvectors: keep_vectors.then_some(vecs),
    })
}

/// `sum_n rho((E_n - E)/hbar)`.
pub fn smoothed_counting(spec: &Spectrum, rho: &TestFunction, e: f64) -> f64 {
    let hbar = spec.hbar();
    spec.eigenvalues.iter().map(|&en| rho.rho((en - e) / hbar)).sum()
}

/// `#{n : |E_n - E| < r hbar}`.
pub fn local_count(spec: &Spectrum, e: f64, r: f64) -> usize {
    let w = r * spec.hbar();
    spec.eigenvalues.iter().filter(|&&en| (en - e).abs() < w).count()
}

/// `tr U(t) = sum_n e^{-i E_n t / hbar}`.
pub fn propagator_trace(spec: &Spectrum, t: f64) -> Complex64 {
    let hbar = spec.hbar();
    spec.eigenvalues.iter().map(|&en| Complex64::from_polar(1.0, -en * t / hbar)).sum()
}

/// Energy-localised trace `sum_n w_n e^{-i E_n t / hbar}` with Gaussian weights
/// `w_n = exp(-(E_n - E)^2 / (2 width^2))`; isolates the recurrences of orbits near `E`.
pub fn windowed_propagator_trace(spec: &Spectrum, t: f64, e: f64, width: f64) -> Complex64 {
    let hbar = spec.hbar();
    spec.eigenvalues
        .iter()
        .map(|&en| {
            let w = (-(en - e).powi(2) / (2.0 * width * width)).exp();
            Complex64::from_polar(w, -en * t / hbar)
        })
        .sum()
}

/// Local maxima of `|f(t)|` sampled on a uniform grid over `[t_lo, t_hi]`, refined by
/// golden-section search. Returned sorted by `t`.
pub fn trace_peaks<F>(f: F, t_lo: f64, t_hi: f64, samples: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let samples = samples.max(3);
    let dt = (t_hi - t_lo) / (samples - 1) as f64;
    let vals: Vec<f64> = (0..samples).map(|i| f(t_lo + i as f64 * dt)).collect();
    let mut peaks = Vec::new();
    for i in 1..samples - 1 {
        if vals[i] > vals[i - 1] && vals[i] >= vals[i + 1] {
            let (mut a, mut b) = (t_lo + (i - 1) as f64 * dt, t_lo + (i + 1) as f64 * dt);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..60 {
                let c = b - g * (b - a);
                let d = a + g * (b - a);
                if f(c) > f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let t = 0.5 * (a + b);
            peaks.push((t, f(t)));
        }
    }
    peaks
}

/// Both sides of `sum rho((E_n - E)/hbar) = (1/2 pi) int rho_hat(t) tr U(t) e^{iEt/hbar} dt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FourierIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub deviation: f64,
}

/// Minimum node count accepted by [`fourier_identity_check`].
pub fn fourier_quadrature_guard(spec: &Spectrum, rho: &TestFunction, e: f64) -> usize {
    let spread = spec.eigenvalues.iter().map(|&en| (en - e).abs()).fold(0.0, f64::max);
    (20.0 * rho.support() * spread / (2.0 * std::f64::consts::PI * spec.hbar())).ceil() as usize + 200
}

/// Evaluates the Fourier-pair identity with `t_quad` Gauss–Legendre nodes on `[-T, T]`.
pub fn fourier_identity_check(spec: &Spectrum, rho: &TestFunction, e: f64, t_quad: usize) -> Result<FourierIdentity> {
    let need = fourier_quadrature_guard(spec, rho, e);
    if t_quad < need {
        return Err(Error::Resolution(format!("t_quad = {t_quad} below the oscillation guard {need}")));
    }
    let lhs = smoothed_counting(spec, rho, e);
    let gl = GaussLegendre::standard();
    let panels = t_quad.div_ceil(gl.nodes.len());
    let hbar = spec.hbar();
    let t_sup = rho.support();
    // integrand is even in t; integrate the real part
    let rhs = gl.integrate_composite(-t_sup, t_sup, panels, |t| {
        let rh = rho.rho_hat(t);
        if rh == 0.0 {
            return 0.0;
        }
        let s: f64 = spec.eigenvalues.iter().map(|&en| ((e - en) * t / hbar).cos()).sum();
        rh * s
    }) / (2.0 * std::f64::consts::PI);
    Ok(FourierIdentity { lhs, rhs, deviation: (lhs - rhs).abs() })
}
