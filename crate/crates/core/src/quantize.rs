//! Quantisation maps: translation operators, Weyl and anti-Wick quantisation.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::symbols::FourierSymbol;
use crate::torus::TorusGeometry;

/// Largest dimension for which the JSON matrix dump is produced.
pub const JSON_DUMP_MAX_DIM: usize = 64;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dense Hermitian matrix with its torus and a provenance label.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    geom: TorusGeometry,
    entries: DMatrix<Complex64>,
    label: String,
}

impl HermitianOperator {
    /// Wraps a matrix, projecting onto its Hermitian part after checking the defect.
    pub fn new(geom: TorusGeometry, entries: DMatrix<Complex64>, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        let n = geom.dim();
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::GeometryMismatch);
        }
        let defect = max_abs(&(&entries - entries.adjoint()));
        let scale = max_abs(&entries);
        if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::Precondition(format!(
                "{label}: matrix not Hermitian (defect {defect:e}, scale {scale:e})"
            )));
        }
        let entries = (&entries + entries.adjoint()).map(|z| z * 0.5);
        Ok(Self { geom, entries, label })
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// Spectral norm, i.e. the largest singular value.
    pub fn norm2(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Columnar `row,col,re,im` CSV of every entry, row-major.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("row,col,re,im\n");
        let n = self.dim();
        for r in 0..n {
            for c in 0..n {
                let z = self.entries[(r, c)];
                writeln!(s, "{r},{c},{},{}", sig17(z.re), sig17(z.im)).unwrap();
            }
        }
        s
    }

    /// JSON dump `{label, N, ell_x, ell_xi, hbar, re: [[..]], im: [[..]]}` for small matrices.
    pub fn to_json(&self) -> Result<String> {
        let n = self.dim();
        if n > JSON_DUMP_MAX_DIM {
            return Err(Error::Precondition(format!(
                "JSON dump limited to N <= {JSON_DUMP_MAX_DIM}, got {n}"
            )));
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            label: &'a str,
            #[serde(rename = "N")]
            n: usize,
            ell_x: f64,
            ell_xi: f64,
            hbar: f64,
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..n).map(|r| (0..n).map(|c| f(&self.entries[(r, c)])).collect()).collect()
        };
        let d = Dump {
            label: &self.label,
            n,
            ell_x: self.geom.ell_x(),
            ell_xi: self.geom.ell_xi(),
            hbar: self.geom.hbar(),
            re: rows(|z| z.re),
            im: rows(|z| z.im),
        };
        Ok(serde_json::to_string_pretty(&d)?)
    }
}

/// Largest singular value of a dense complex matrix.
pub fn spectral_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Dense unitary matrix.
#[derive(Clone, Debug)]
pub struct UnitaryOperator {
    geom: TorusGeometry,
    entries: DMatrix<Complex64>,
}

impl UnitaryOperator {
    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// `max |U U* - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.entries.nrows();
        max_abs(&(&self.entries * self.entries.adjoint() - DMatrix::identity(n, n)))
    }

    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(psi);
        (&self.entries * v).iter().copied().collect()
    }
}

/// Phase of `T^{mn}` at row `l`: the entry sits at column `(l + m) mod N`.
fn translation_phase(n_dim: usize, m: i64, n: i64, l: usize) -> Complex64 {
    // e^{i pi n m / N} e^{-2 pi i (l+m) n / N} = e^{-2 pi i n (l + m/2) / N}
    let arg = -2.0 * PI * (n as f64) * (l as f64 + 0.5 * m as f64) / n_dim as f64;
    Complex64::from_polar(1.0, arg)
}

/// `T^{mn} = e^{i pi nm/N} T^{m0} T^{0n}` with `(T^{m0}psi)_l = psi_{l+m}` and
/// `(T^{0n}psi)_l = e^{-2 pi i l n / N} psi_l`.
pub fn translation_op(geom: &TorusGeometry, m: i64, n: i64) -> UnitaryOperator {
    let dim = geom.dim();
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    for l in 0..dim {
        let col = (l as i64 + m).rem_euclid(dim as i64) as usize;
        entries[(l, col)] = translation_phase(dim, m, n, l);
    }
    UnitaryOperator { geom: *geom, entries }
}

/// `op_N(f) = sum f_{mn} T^{mn}` over the symbol's stored support (no index folding).
pub fn weyl_op(symbol: &FourierSymbol, geom: &TorusGeometry) -> Result<HermitianOperator> {
    if !symbol.geom().same_lengths(geom) {
        return Err(Error::GeometryMismatch);
    }
    let dim = geom.dim();
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    for (&(m, n), &c) in symbol.coeffs() {
        for l in 0..dim {
            let col = (l as i64 + m).rem_euclid(dim as i64) as usize;
            entries[(l, col)] += c * translation_phase(dim, m, n, l);
        }
    }
    HermitianOperator::new(*geom, entries, format!("weyl({})", symbol.label()))
}

/// Weyl quantisation from the mid-point integral representation
/// `A_{k, m mod N} += (1/l_xi) int f(l_x (k+m)/2N, xi) e^{2 pi i (k-m) xi / l_xi} dxi`,
/// with the `m`-sum cut at `|k - m| <= N`.
pub fn weyl_op_direct<F>(f: F, geom: &TorusGeometry, xi_quad: usize) -> Result<HermitianOperator>
where
    F: Fn(f64, f64) -> f64,
{
    let dim = geom.dim();
    if xi_quad < 8 * dim {
        return Err(Error::Resolution(format!("xi_quad = {xi_quad} below 8 N = {}", 8 * dim)));
    }
    let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
    let mq = xi_quad;
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(mq);
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    let ni = dim as i64;
    // midpoint index s = k + m ranges over [-N, 3N - 2]
    let mut buf = vec![ZERO; mq];
    for s in -ni..=(3 * ni - 2) {
        let x = lx * s as f64 / (2.0 * dim as f64);
        for (b, z) in buf.iter_mut().enumerate() {
            *z = Complex64::new(f(x, lxi * b as f64 / mq as f64), 0.0);
        }
        // inverse FFT: sum_b f_b e^{+2 pi i d b / M}
        ifft.process(&mut buf);
        for k in 0..ni {
            let m = s - k;
            if (k - m).abs() > ni {
                continue;
            }
            let d = k - m;
            let g = buf[d.rem_euclid(mq as i64) as usize] / mq as f64;
            entries[(k as usize, m.rem_euclid(ni) as usize)] += g;
        }
    }
    HermitianOperator::new(*geom, entries, "weyl_direct")
}

/// `-Delta` with `(-Delta psi)_l = -(N^2/l_x^2)(psi_{l+1} + psi_{l-1} - 2 psi_l)`, cyclic.
pub fn discrete_laplacian(geom: &TorusGeometry) -> HermitianOperator {
    let dim = geom.dim();
    let k = (dim * dim) as f64 / (geom.ell_x() * geom.ell_x());
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    for l in 0..dim {
        entries[(l, l)] += Complex64::new(2.0 * k, 0.0);
        entries[(l, (l + 1) % dim)] -= Complex64::new(k, 0.0);
        entries[(l, (l + dim - 1) % dim)] -= Complex64::new(k, 0.0);
    }
    HermitianOperator::new(*geom, entries, "laplacian").expect("real symmetric")
}

/// Quadrature parameters derived for one anti-Wick build.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AntiWickGrid {
    /// x-nodes per period (a multiple of `2N`, so Gaussian centres are nodes).
    pub x_nodes: usize,
    /// xi-nodes per period.
    pub xi_nodes: usize,
    /// Largest Fourier-in-xi index kept.
    pub d_max: i64,
    /// Half-width of the x window in units of the x step.
    pub window: usize,
}

impl AntiWickGrid {
    fn plan(geom: &TorusGeometry, quad: usize) -> Result<Self> {
        let dim = geom.dim();
        let hbar = geom.hbar();
        let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
        let q = quad.div_ceil(2 * dim).max(1);
        let x_nodes = 2 * dim * q;
        let h = lx / x_nodes as f64;
        if h > 0.25 * hbar.sqrt() {
            return Err(Error::Resolution(format!(
                "anti-Wick x step {h:e} exceeds sqrt(hbar)/4 = {:e}; increase quad above {}",
                0.25 * hbar.sqrt(),
                quad
            )));
        }
        // damping e^{-alpha d^2}, alpha = hbar pi^2 / l_xi^2; keep terms above 1e-18
        let alpha = hbar * PI * PI / (lxi * lxi);
        let d_max = (41.5 / alpha).sqrt().ceil() as i64;
        let xi_nodes = quad.max(4 * d_max as usize + 8);
        let half = 6.0 * (hbar * lx.max(lxi).max(1.0)).sqrt();
        let window = (half / h).ceil() as usize;
        Ok(Self { x_nodes, xi_nodes, d_max, window })
    }
}

/// Anti-Wick quantisation by direct quadrature of the coherent-state matrix elements
/// `sqrt(1/pi hbar) sum_n e^{-alpha d^2} int_R g(x, d) e^{-(x - c)^2/hbar} dx`,
/// `d = j - k - nN`, `c = ((j+k)/2N - n/2) l_x`, `g(x,d) = (1/l_xi) int f e^{2 pi i d xi/l_xi} dxi`.
///
/// `quad` sets the minimum number of nodes per period in each direction.
pub fn anti_wick_op<F>(f: F, geom: &TorusGeometry, n_trunc: usize, quad: usize) -> Result<HermitianOperator>
where
    F: Fn(f64, f64) -> f64,
{
    if n_trunc < 3 {
        return Err(Error::Precondition(format!("n_trunc = {n_trunc} below 3")));
    }
    let grid = AntiWickGrid::plan(geom, quad)?;
    let dim = geom.dim();
    let hbar = geom.hbar();
    let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
    let p = grid.x_nodes;
    let mq = grid.xi_nodes;
    let h = lx / p as f64;
    let dm = grid.d_max;
    let width = 2 * dm as usize + 1;

    // g[p][d + d_max]
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(mq);
    let mut g = vec![ZERO; p * width];
    let mut buf = vec![ZERO; mq];
    for a in 0..p {
        let x = a as f64 * h;
        for (b, z) in buf.iter_mut().enumerate() {
            *z = Complex64::new(f(x, lxi * b as f64 / mq as f64), 0.0);
        }
        ifft.process(&mut buf);
        for d in -dm..=dm {
            g[a * width + (d + dm) as usize] = buf[d.rem_euclid(mq as i64) as usize] / mq as f64;
        }
    }

    let w = grid.window as i64;
    let norm = (1.0 / (PI * hbar)).sqrt() * h;
    let gauss: Vec<f64> = (-w..=w).map(|t| norm * (-(t as f64 * h).powi(2) / hbar).exp()).collect();
    let alpha = hbar * PI * PI / (lxi * lxi);
    let q = (p / (2 * dim)) as i64;
    let ni = dim as i64;
    let nt = n_trunc as i64;

    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    for j in 0..ni {
        for k in 0..ni {
            let mut acc = ZERO;
            for n in -nt..=nt {
                let d = j - k - n * ni;
                if d.abs() > dm {
                    continue;
                }
                let damp = (-alpha * (d * d) as f64).exp();
                // centre index on the x grid: c / h = (j + k - nN) q
                let c_idx = (j + k - n * ni) * q;
                let col = (d + dm) as usize;
                let mut s = ZERO;
                for (t, &wt) in (-w..=w).zip(&gauss) {
                    let a = (c_idx + t).rem_euclid(p as i64) as usize;
                    s += g[a * width + col] * wt;
                }
                acc += s * damp;
            }
            entries[(j as usize, k as usize)] = acc;
        }
    }
    HermitianOperator::new(*geom, entries, "anti_wick")
}

/// Axis on which a one-dimensional symbol depends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Xi,
}

/// Anti-Wick quantisation of `phi(x) = sum phi_n e^{2 pi i n x / l_x}` or
/// `phi(xi) = sum phi_n e^{2 pi i n xi / l_xi}` by the closed-form Gaussian damping.
pub fn anti_wick_special(
    phi_coeffs: &[(i64, Complex64)],
    axis: Axis,
    geom: &TorusGeometry,
) -> Result<HermitianOperator> {
    let scale = phi_coeffs.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let lookup = |n: i64| -> Complex64 {
        phi_coeffs.iter().filter(|(k, _)| *k == n).map(|(_, c)| *c).sum()
    };
    for &(n, c) in phi_coeffs {
        if (lookup(-n) - c.conj()).norm() > 1e-12 * scale {
            return Err(Error::Spec(format!("phi_{n} and phi_{} violate the reality constraint", -n)));
        }
    }
    let dim = geom.dim();
    let hbar = geom.hbar();
    let ni = dim as i64;
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    match axis {
        Axis::X => {
            let l2 = geom.ell_x() * geom.ell_x();
            for j in 0..dim {
                let mut acc = ZERO;
                for &(n, c) in phi_coeffs {
                    let damp = (-hbar * PI * PI * (n * n) as f64 / l2).exp();
                    let ph = Complex64::from_polar(1.0, 2.0 * PI * (j as i64 * n).rem_euclid(ni) as f64 / dim as f64);
                    acc += c * ph * damp;
                }
                entries[(j, j)] = acc;
            }
        }
        Axis::Xi => {
            let l2 = geom.ell_xi() * geom.ell_xi();
            for &(a, c) in phi_coeffs {
                // phi_a lands on every (j, k) with k - j = a - nN
                let damp = (-hbar * PI * PI * (a * a) as f64 / l2).exp();
                for j in 0..dim {
                    let k = (j as i64 + a).rem_euclid(ni) as usize;
                    entries[(j, k)] += c * damp;
                }
            }
        }
    }
    HermitianOperator::new(*geom, entries, "anti_wick_special")
}

/// Closed-form quantisations of `c0 + a_xi cos(2 pi xi / l_xi) + a_x cos(2 pi x / l_x)`.
///
/// Weyl: `c0 I + (a_xi/2)(S + S*) + a_x diag cos(2 pi j / N)`. Anti-Wick damps the two
/// cosine terms by `e^{-hbar pi^2/l_xi^2}` and `e^{-hbar pi^2/l_x^2}`; the constant is kept.
/// Harper is `(0, 1, 1)`; the discretised Schrödinger operator `-(N^2/l_x^2) lattice Laplacian
/// + cos` is `(2N^2/l_x^2, -2N^2/l_x^2, 1)`.
pub fn cosine_closed_form(geom: &TorusGeometry, c0: f64, a_xi: f64, a_x: f64, anti_wick: bool) -> HermitianOperator {
    let dim = geom.dim();
    let hbar = geom.hbar();
    let (dxi, dx) = if anti_wick {
        (
            (-hbar * PI * PI / (geom.ell_xi() * geom.ell_xi())).exp(),
            (-hbar * PI * PI / (geom.ell_x() * geom.ell_x())).exp(),
        )
    } else {
        (1.0, 1.0)
    };
    let mut entries = DMatrix::from_element(dim, dim, ZERO);
    for j in 0..dim {
        entries[(j, j)] += Complex64::new(c0 + a_x * dx * (2.0 * PI * j as f64 / dim as f64).cos(), 0.0);
        entries[(j, (j + 1) % dim)] += Complex64::new(0.5 * a_xi * dxi, 0.0);
        entries[(j, (j + dim - 1) % dim)] += Complex64::new(0.5 * a_xi * dxi, 0.0);
    }
    let label = if anti_wick { "anti_wick_closed_form" } else { "weyl_closed_form" };
    HermitianOperator::new(*geom, entries, label).expect("real symmetric")
}

/// Outcome of [`operator_trace_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TraceCheck {
    Checked { trace_re: f64, trace_im: f64, phase_space_average: f64, deviation: f64 },
    Skipped { reason: String },
}

/// Compares `tr A` with `N f_00`; skipped when the truncation aliases (`max_m` or `max_n >= N`).
pub fn operator_trace_check(a: &HermitianOperator, symbol: &FourierSymbol) -> TraceCheck {
    let n = a.dim();
    if symbol.max_m() >= n as i64 || symbol.max_n() >= n as i64 {
        return TraceCheck::Skipped {
            reason: format!(
                "truncation (max_m = {}, max_n = {}) reaches N = {n}: modes alias into the trace",
                symbol.max_m(),
                symbol.max_n()
            ),
        };
    }
    let tr = a.trace();
    let avg = symbol.coeff(0, 0).re;
    let dev = (tr - Complex64::new(n as f64 * avg, 0.0)).norm();
    TraceCheck::Checked { trace_re: tr.re, trace_im: tr.im, phase_space_average: avg, deviation: dev }
}
