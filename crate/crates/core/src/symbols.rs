//! Classical observables on the torus as truncated double Fourier series.
//!
//! Convention: `f(x, xi) = sum f_{mn} exp(2 pi i (m xi / l_xi - n x / l_x))`, so the first
//! index `m` is conjugate to momentum `xi` and the second index `n` to position `x`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::TorusGeometry;

/// Default truncation for symbols sampled from arbitrary callables.
pub const DEFAULT_TRUNCATION: i64 = 32;

const PRUNE_REL: f64 = 1e-14;

/// A real observable stored by its Fourier coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSymbol {
    geom: TorusGeometry,
    coeffs: BTreeMap<(i64, i64), Complex64>,
    max_m: i64,
    max_n: i64,
    smooth: bool,
    label: String,
}

impl FourierSymbol {
    /// Builds a symbol from coefficients, completing missing conjugate partners.
    ///
    /// Fails if a stored pair violates `f_{-m,-n} = conj(f_{m,n})` or exceeds the truncation.
    pub fn from_coeffs(
        geom: TorusGeometry,
        coeffs: impl IntoIterator<Item = ((i64, i64), Complex64)>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut map: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
        for ((m, n), c) in coeffs {
            *map.entry((m, n)).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        let scale = map.values().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
        let keys: Vec<_> = map.keys().copied().collect();
        for (m, n) in keys {
            let c = map[&(m, n)];
            match map.get(&(-m, -n)).copied() {
                Some(p) => {
                    if (p - c.conj()).norm() > 1e-12 * scale {
                        return Err(Error::Spec(format!(
                            "coefficient ({m},{n}) = {c} is not the conjugate of ({},{}) = {p}",
                            -m, -n
                        )));
                    }
                }
                None => {
                    map.insert((-m, -n), c.conj());
                }
            }
        }
        // exact reality for self-conjugate pairs
        if let Some(c) = map.get_mut(&(0, 0)) {
            c.im = 0.0;
        }
        map.retain(|_, c| c.norm() > PRUNE_REL * scale || scale == 1e-300);
        let max_m = map.keys().map(|k| k.0.abs()).max().unwrap_or(0);
        let max_n = map.keys().map(|k| k.1.abs()).max().unwrap_or(0);
        Ok(Self { geom, coeffs: map, max_m, max_n, smooth: true, label: label.into() })
    }

    pub fn constant(geom: TorusGeometry, c: f64) -> Self {
        Self::from_coeffs(geom, [((0, 0), Complex64::new(c, 0.0))], "constant").expect("real constant")
    }

    pub fn geom(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn coeffs(&self) -> &BTreeMap<(i64, i64), Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, m: i64, n: i64) -> Complex64 {
        self.coeffs.get(&(m, n)).copied().unwrap_or_default()
    }

    pub fn max_m(&self) -> i64 {
        self.max_m
    }

    pub fn max_n(&self) -> i64 {
        self.max_n
    }

    /// False for symbols that are continuous but not smooth on the torus.
    pub fn is_smooth(&self) -> bool {
        self.smooth
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True if the symbol does not depend on `xi`.
    pub fn is_position_only(&self) -> bool {
        self.coeffs.keys().all(|&(m, _)| m == 0)
    }

    /// True if the symbol does not depend on `x`.
    pub fn is_momentum_only(&self) -> bool {
        self.coeffs.keys().all(|&(_, n)| n == 0)
    }

    /// `sum |f_{mn}|`, a bound on `|f|`.
    pub fn value_scale(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// A bound on `|grad f|` from term-wise differentiation.
    pub fn gradient_scale(&self) -> f64 {
        let (lx, lxi) = (self.geom.ell_x(), self.geom.ell_xi());
        self.coeffs
            .iter()
            .map(|(&(m, n), c)| {
                let km = m as f64 / lxi;
                let kn = n as f64 / lx;
                c.norm() * 2.0 * PI * (km * km + kn * kn).sqrt()
            })
            .sum()
    }

    fn phase(&self, m: i64, n: i64, x: f64, xi: f64) -> Complex64 {
        let arg = 2.0 * PI * (m as f64 * xi / self.geom.ell_xi() - n as f64 * x / self.geom.ell_x());
        Complex64::from_polar(1.0, arg)
    }

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        self.coeffs.iter().map(|(&(m, n), c)| (c * self.phase(m, n, x, xi)).re).sum()
    }

    /// `(d/dx, d/dxi)` of the truncated series.
    pub fn gradient(&self, x: f64, xi: f64) -> (f64, f64) {
        let (lx, lxi) = (self.geom.ell_x(), self.geom.ell_xi());
        let mut gx = 0.0;
        let mut gxi = 0.0;
        for (&(m, n), c) in &self.coeffs {
            let t = c * self.phase(m, n, x, xi);
            // d/dx e^{...} = -2 pi i n / l_x, d/dxi = 2 pi i m / l_xi
            let i_t = Complex64::new(-t.im, t.re);
            gx += (i_t * (-2.0 * PI * n as f64 / lx)).re;
            gxi += (i_t * (2.0 * PI * m as f64 / lxi)).re;
        }
        (gx, gxi)
    }

    /// `[[f_xx, f_xxi], [f_xxi, f_xixi]]`.
    pub fn hessian(&self, x: f64, xi: f64) -> [[f64; 2]; 2] {
        let (lx, lxi) = (self.geom.ell_x(), self.geom.ell_xi());
        let (mut hxx, mut hxxi, mut hxixi) = (0.0, 0.0, 0.0);
        for (&(m, n), c) in &self.coeffs {
            let t = (c * self.phase(m, n, x, xi)).re;
            let kx = -2.0 * PI * n as f64 / lx;
            let kxi = 2.0 * PI * m as f64 / lxi;
            // second derivatives pick up (i k)(i k') = -k k'
            hxx -= kx * kx * t;
            hxxi -= kx * kxi * t;
            hxixi -= kxi * kxi * t;
        }
        [[hxx, hxxi], [hxxi, hxixi]]
    }

    /// Same coefficients with the constant term shifted by `-e`.
    pub fn shifted(&self, e: f64) -> Self {
        let mut s = self.clone();
        *s.coeffs.entry((0, 0)).or_default() -= Complex64::new(e, 0.0);
        s
    }

    /// Sum of two symbols on the same torus.
    pub fn add(&self, other: &FourierSymbol) -> Result<Self> {
        if !self.geom.same_lengths(&other.geom) {
            return Err(Error::GeometryMismatch);
        }
        let label = format!("{}+{}", self.label, other.label);
        let mut out = Self::from_coeffs(
            self.geom,
            self.coeffs.iter().chain(other.coeffs.iter()).map(|(k, v)| (*k, *v)),
            label,
        )?;
        out.smooth = self.smooth && other.smooth;
        Ok(out)
    }

    /// Rebinds the symbol to a torus with the same lengths but a different dimension.
    pub fn with_geom(&self, geom: TorusGeometry) -> Result<Self> {
        if !self.geom.same_lengths(&geom) {
            return Err(Error::GeometryMismatch);
        }
        let mut s = self.clone();
        s.geom = geom;
        Ok(s)
    }
}

/// Fourier coefficients of a periodic callable by the trapezoid rule on a `quad x quad` grid.
pub fn fourier_coefficients<F>(
    f: F,
    geom: TorusGeometry,
    max_m: i64,
    max_n: i64,
    quad_per_mode: usize,
) -> Result<FourierSymbol>
where
    F: Fn(f64, f64) -> f64,
{
    if max_m < 0 || max_n < 0 {
        return Err(Error::Spec("truncation bounds must be non-negative".into()));
    }
    let need = 4 * max_m.max(max_n).max(1) as usize;
    if quad_per_mode < need {
        return Err(Error::Resolution(format!(
            "quadrature grid {quad_per_mode} below 4 * max(max_m, max_n) = {need}"
        )));
    }
    let q = quad_per_mode;
    let (lx, lxi) = (geom.ell_x(), geom.ell_xi());
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(q);
    // rows indexed by x sample a, columns by xi sample b
    let mut grid: Vec<Vec<Complex64>> = (0..q)
        .map(|a| {
            let x = a as f64 * lx / q as f64;
            (0..q).map(|b| Complex64::new(f(x, b as f64 * lxi / q as f64), 0.0)).collect()
        })
        .collect();
    for row in grid.iter_mut() {
        fft.process(row);
    }
    let norm = 1.0 / (q * q) as f64;
    let mut coeffs = Vec::new();
    for m in -max_m..=max_m {
        let col = m.rem_euclid(q as i64) as usize;
        let mut column: Vec<Complex64> = grid.iter().map(|row| row[col]).collect();
        fft.process(&mut column);
        for n in -max_n..=max_n {
            let k = (-n).rem_euclid(q as i64) as usize;
            coeffs.push(((m, n), column[k] * norm));
        }
    }
    // symmetrise: f_{mn} <- (f_{mn} + conj f_{-m,-n}) / 2
    let raw: BTreeMap<(i64, i64), Complex64> = coeffs.into_iter().collect();
    let sym: Vec<_> = raw
        .iter()
        .map(|(&(m, n), c)| ((m, n), 0.5 * (c + raw[&(-m, -n)].conj())))
        .collect();
    let scale = sym.iter().map(|(_, c)| c.norm()).fold(0.0, f64::max);
    let kept = sym.into_iter().filter(|(_, c)| c.norm() > PRUNE_REL * scale.max(1e-300));
    let mut s = FourierSymbol::from_coeffs(geom, kept, "sampled")?;
    s.max_m = max_m;
    s.max_n = max_n;
    Ok(s)
}

/// Shipped model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Harper,
    PotentialOnly,
    KineticCos,
    ShiftedParabola,
    Custom,
}

/// Model description as read from a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `[m, n, re, im]` entries.
    #[serde(default)]
    pub coeffs: Vec<(i64, i64, f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_m: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_n: Option<i64>,
}

impl ModelSpec {
    pub fn of_kind(kind: ModelKind) -> Self {
        Self { kind, coeffs: Vec::new(), max_m: None, max_n: None }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `cos(2 pi x / l_x) + cos(2 pi xi / l_xi)`.
pub fn harper(geom: TorusGeometry) -> FourierSymbol {
    FourierSymbol::from_coeffs(
        geom,
        [((0, 1), c(0.5)), ((0, -1), c(0.5)), ((1, 0), c(0.5)), ((-1, 0), c(0.5))],
        "harper",
    )
    .expect("real coefficients")
}

/// `(l_xi^2 / 2 pi^2)(1 - cos(2 pi xi / l_xi))`, the symbol of `-hbar^2 Laplacian`.
pub fn kinetic_cos(geom: TorusGeometry) -> FourierSymbol {
    let l2 = geom.ell_xi() * geom.ell_xi();
    FourierSymbol::from_coeffs(
        geom,
        [
            ((0, 0), c(l2 / (2.0 * PI * PI))),
            ((1, 0), c(-l2 / (4.0 * PI * PI))),
            ((-1, 0), c(-l2 / (4.0 * PI * PI))),
        ],
        "kinetic_cos",
    )
    .expect("real coefficients")
}

/// `cos(2 pi x / l_x)`.
pub fn cos_potential(geom: TorusGeometry) -> FourierSymbol {
    FourierSymbol::from_coeffs(geom, [((0, 1), c(0.5)), ((0, -1), c(0.5))], "cos_potential")
        .expect("real coefficients")
}

/// Fourier series of `(xi - l_xi/2)^2` on `[0, l_xi)`, truncated at `|m| <= max_m`.
///
/// Continuous but not smooth on the torus; flagged accordingly.
pub fn shifted_parabola(geom: TorusGeometry, max_m: i64) -> FourierSymbol {
    let l2 = geom.ell_xi() * geom.ell_xi();
    let mut coeffs = vec![((0, 0), c(l2 / 12.0))];
    for m in 1..=max_m {
        let v = l2 / (2.0 * PI * PI * (m * m) as f64);
        coeffs.push(((m, 0), c(v)));
        coeffs.push(((-m, 0), c(v)));
    }
    let mut s = FourierSymbol::from_coeffs(geom, coeffs, "shifted_parabola").expect("real coefficients");
    s.smooth = false;
    s.max_m = max_m;
    s
}

/// Exact spectrum `(m/N - 1/2)^2 l_xi^2`, `m = 1..N`, of the untruncated shifted parabola.
pub fn shifted_parabola_spectrum(geom: &TorusGeometry) -> Vec<f64> {
    let n = geom.dim() as f64;
    let mut v: Vec<f64> = (1..=geom.dim())
        .map(|m| {
            let u = m as f64 / n - 0.5;
            u * u * geom.ell_xi() * geom.ell_xi()
        })
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Instantiates a model spec on a torus.
pub fn build_model(spec: &ModelSpec, geom: TorusGeometry) -> Result<FourierSymbol> {
    let user = || -> Vec<((i64, i64), Complex64)> {
        spec.coeffs.iter().map(|&(m, n, re, im)| ((m, n), Complex64::new(re, im))).collect()
    };
    let check_bounds = |s: FourierSymbol| -> Result<FourierSymbol> {
        if let Some(mm) = spec.max_m {
            if s.max_m > mm {
                return Err(Error::Spec(format!("coefficient with |m| > max_m = {mm}")));
            }
        }
        if let Some(mn) = spec.max_n {
            if s.max_n > mn {
                return Err(Error::Spec(format!("coefficient with |n| > max_n = {mn}")));
            }
        }
        Ok(s)
    };
    match spec.kind {
        ModelKind::Harper => Ok(harper(geom)),
        ModelKind::KineticCos => Ok(kinetic_cos(geom)),
        ModelKind::ShiftedParabola => Ok(shifted_parabola(geom, spec.max_m.unwrap_or(DEFAULT_TRUNCATION))),
        ModelKind::PotentialOnly => {
            if spec.coeffs.is_empty() {
                return Ok(cos_potential(geom));
            }
            if spec.coeffs.iter().any(|&(m, ..)| m != 0) {
                return Err(Error::Spec("potential_only coefficients must have m = 0".into()));
            }
            check_bounds(FourierSymbol::from_coeffs(geom, user(), "potential_only")?)
        }
        ModelKind::Custom => {
            if spec.coeffs.is_empty() {
                return Err(Error::Spec("custom model requires coefficients".into()));
            }
            check_bounds(FourierSymbol::from_coeffs(geom, user(), "custom")?)
        }
    }
}
