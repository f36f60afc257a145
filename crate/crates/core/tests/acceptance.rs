//! End-to-end acceptance checks. Each criterion prints one line; the process exits nonzero if
//! any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;

use num_complex::Complex64;
use torus_trace::bohr_sommerfeld::{bracketing_check, bs_predict};
use torus_trace::orbits::{action_derivative_check, orbit_catalog};
use torus_trace::quantize::{
    anti_wick_op, anti_wick_special, cosine_closed_form, discrete_laplacian, spectral_norm, weyl_op, Axis,
};
use torus_trace::spectral::{eigendecompose, fourier_identity_check, fourier_quadrature_guard, Spectrum, DEFAULT_DEGENERACY_TOL};
use torus_trace::symbols::{cos_potential, harper, kinetic_cos};
use torus_trace::trace_formula::{
    compare, make_test_function, poisson_shipped, potential_case_rhs, van_vleck_row_error,
};
use torus_trace::{FourierSymbol, TorusGeometry};

// contour resolution used throughout
const GRID: usize = 256;
// test-function support relative to the shortest primitive period
const T_COVER: f64 = 1.35;
const T_BELOW: f64 = 0.8;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion = fn() -> Outcome;

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sq(n: usize) -> TorusGeometry {
    TorusGeometry::square(n).unwrap()
}

fn spectrum(h: &FourierSymbol, g: &TorusGeometry) -> Spectrum {
    eigendecompose(&weyl_op(h, g).unwrap(), DEFAULT_DEGENERACY_TOL, false).unwrap()
}

fn max_rel_entry_diff(a: &nalgebra::DMatrix<Complex64>, b: &nalgebra::DMatrix<Complex64>) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Weyl symbol of the cosine kinetic term against `hbar^2` times the lattice Laplacian.
fn criterion_1() -> Outcome {
    let tol = 1e-12;
    let mut worst: f64 = 0.0;
    for n in [4, 8, 16, 64] {
        let g = sq(n);
        let w = weyl_op(&kinetic_cos(g), &g).unwrap();
        let lap = discrete_laplacian(&g).entries() * Complex64::new(g.hbar() * g.hbar(), 0.0);
        worst = worst.max(max_rel_entry_diff(w.entries(), &lap));
    }
    outcome(worst < tol, format!("max relative entry deviation {worst:.3e} (tol {tol:e})"))
}

/// Laplacian and potential-only spectra against their closed forms.
fn criterion_2() -> Outcome {
    let tol = 1e-10;
    let mut worst: f64 = 0.0;
    let mut pattern_ok = true;
    for n in [4, 7, 16, 64, 128, 511, 512] {
        let g = sq(n);
        let lxi2 = g.ell_xi() * g.ell_xi();
        let a = discrete_laplacian(&g).entries() * Complex64::new(g.hbar() * g.hbar(), 0.0);
        let op = torus_trace::quantize::HermitianOperator::new(g, a, "hbar2_laplacian").unwrap();
        let spec = eigendecompose(&op, 1e-9, false).unwrap();
        let mut exact: Vec<f64> =
            (1..=n).map(|m| lxi2 / (2.0 * PI * PI) * (1.0 - (2.0 * PI * m as f64 / n as f64).cos())).collect();
        exact.sort_by(f64::total_cmp);
        for (x, y) in spec.eigenvalues().iter().zip(&exact) {
            worst = worst.max((x - y).abs());
        }
        // 0 simple; top simple for even N; all others doubled
        let groups = spec.groups();
        let top_simple = n % 2 == 0;
        for (i, &(val, mult)) in groups.iter().enumerate() {
            let want = if i == 0 || (top_simple && i == groups.len() - 1) { 1 } else { 2 };
            if mult != want {
                pattern_ok = false;
            }
            if i == 0 && val.abs() > tol {
                pattern_ok = false;
            }
        }
        if top_simple && (groups.last().unwrap().0 - lxi2 / (PI * PI)).abs() > tol {
            pattern_ok = false;
        }
        // two potentials: cos, and a mixed trigonometric polynomial
        let mixed = FourierSymbol::from_coeffs(
            g,
            [
                ((0, 1), Complex64::new(0.5, 0.0)),
                ((0, 2), Complex64::new(0.1, -0.15)),
                ((0, 3), Complex64::new(0.0, 0.05)),
                ((0, 0), Complex64::new(0.2, 0.0)),
            ],
            "mixed_potential",
        )
        .unwrap();
        for v in [cos_potential(g), mixed] {
            let spec = spectrum(&v, &g);
            let mut exact: Vec<f64> = (1..=n).map(|m| v.eval(g.ell_x() * m as f64 / n as f64, 0.0)).collect();
            exact.sort_by(f64::total_cmp);
            for (x, y) in spec.eigenvalues().iter().zip(&exact) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    outcome(
        worst < tol && pattern_ok,
        format!("max eigenvalue deviation {worst:.3e} (tol {tol:e}), degeneracy pattern {}", if pattern_ok { "ok" } else { "WRONG" }),
    )
}

/// Harper closed forms, general vs special anti-Wick, and the O(hbar) gap between quantisations.
fn criterion_3() -> Outcome {
    let tol = 1e-8;
    let mut closed_worst: f64 = 0.0;
    let mut aw_worst: f64 = 0.0;
    for n in [8, 16, 32] {
        let g = sq(n);
        let h = harper(g);
        let weyl = weyl_op(&h, &g).unwrap();
        closed_worst =
            closed_worst.max(max_rel_entry_diff(weyl.entries(), cosine_closed_form(&g, 0.0, 1.0, 1.0, false).entries()));
        let aw_closed = cosine_closed_form(&g, 0.0, 1.0, 1.0, true);
        let f = |x: f64, xi: f64| h.eval(x, xi);
        let aw_general = anti_wick_op(f, &g, 8, 512).unwrap();
        closed_worst = closed_worst.max(max_rel_entry_diff(aw_general.entries(), aw_closed.entries()));
        // special-case formulas, one axis at a time
        let half = Complex64::new(0.5, 0.0);
        let ax = anti_wick_special(&[(1, half), (-1, half)], Axis::X, &g).unwrap();
        let axi = anti_wick_special(&[(1, half), (-1, half)], Axis::Xi, &g).unwrap();
        let sum = ax.entries() + axi.entries();
        aw_worst = aw_worst.max(max_rel_entry_diff(aw_general.entries(), &sum));
    }
    let ns = [32usize, 64, 128, 256];
    let mut errs = Vec::new();
    for &n in &ns {
        let g = sq(n);
        let h = harper(g);
        let weyl = weyl_op(&h, &g).unwrap();
        let aw = anti_wick_op(|x, xi| h.eval(x, xi), &g, 8, 512).unwrap();
        errs.push(spectral_norm(&(aw.entries() - weyl.entries())) / weyl.norm2());
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ratio_ok = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    outcome(
        closed_worst < tol && aw_worst < tol && ratio_ok,
        format!(
            "closed-form dev {closed_worst:.3e}, general-vs-special AW dev {aw_worst:.3e} (tol {tol:e}); \
             |AW-W|/|W| ratios [{}] in [1.5, 3]",
            fmt_list(&ratios)
        ),
    )
}

/// Trace formula for `cos x` at E = 0.3: convergence in N and the analytic right-hand side.
fn criterion_4() -> Outcome {
    let e = 0.3;
    let (agree_tol, min_ratio) = (1e-6, 1.3);
    let mut rel = Vec::new();
    let mut agree: f64 = 0.0;
    for n in [64, 128, 256, 512] {
        let g = sq(n);
        let v = cos_potential(g);
        let cat = orbit_catalog(&v, e, GRID).unwrap();
        let rho = make_test_function(T_COVER * cat.min_period().unwrap()).unwrap();
        let r = compare(&spectrum(&v, &g), &cat, &rho, e, &g, None).unwrap();
        let analytic = potential_case_rhs(&v, &rho, e, &g, None).unwrap();
        agree = agree.max((analytic - r.rhs.rhs_total).abs() / analytic.abs());
        rel.push(r.rel_error);
    }
    let ratios: Vec<f64> = rel.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|&r| r >= min_ratio) && agree < agree_tol;
    outcome(
        ok,
        format!(
            "rel_error [{}], ratios [{}] (>= {min_ratio}); generic vs analytic rhs {agree:.3e} (tol {agree_tol:e})",
            fmt_list(&rel),
            fmt_list(&ratios)
        ),
    )
}

/// Trace formula for Harper at E = 1: volume term alone, then one full period.
fn criterion_5() -> Outcome {
    let e = 1.0;
    let ns = [64usize, 128, 256, 512];
    let (mut below, mut cover) = (Vec::new(), Vec::new());
    let mut abs_cover = Vec::new();
    for &n in &ns {
        let g = sq(n);
        let h = harper(g);
        let spec = spectrum(&h, &g);
        let cat = orbit_catalog(&h, e, GRID).unwrap();
        let tp = cat.min_period().unwrap();
        let lo = make_test_function(T_BELOW * tp).unwrap();
        let r = compare(&spec, &cat, &lo, e, &g, None).unwrap();
        assert!(r.rhs.orbit_terms.is_empty());
        below.push(r.rel_error);
        let hi = make_test_function(T_COVER * tp).unwrap();
        let r = compare(&spec, &cat, &hi, e, &g, None).unwrap();
        cover.push(r.rel_error);
        abs_cover.push(r.abs_error);
    }
    // O(hbar): error ratio per doubling of N near 2, measured over the whole range
    let order = (abs_cover[0] / abs_cover[3]).powf(1.0 / 3.0);
    let ok = strictly_decreasing(&below) && strictly_decreasing(&cover) && (1.3..=3.0).contains(&order);
    outcome(
        ok,
        format!(
            "volume-only rel_error [{}]; one-period rel_error [{}], mean ratio per doubling {order:.3} in [1.3, 3]",
            fmt_list(&below),
            fmt_list(&cover)
        ),
    )
}

/// Classical identities: volume, action derivative, start-point independence, Maslov indices.
fn criterion_6() -> Outcome {
    let g = sq(64);
    let (vol_tol, dw_tol, seed_tol) = (1e-6, 1e-4, 1e-6);
    let (mut vol_dev, mut dw_dev, mut seed_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut maslov_ok = true;
    let cases: Vec<(FourierSymbol, f64, i64)> = vec![
        (harper(g), 1.0, 2),
        (harper(g), -1.0, -2),
        (harper(g), 0.5, 2),
        (harper(g), -1.7, -2),
        (cos_potential(g), 0.3, 0),
        (kinetic_cos(g), 2.6, 0),
    ];
    for (h, e, sigma) in &cases {
        let cat = orbit_catalog(h, *e, GRID).unwrap();
        let ode: f64 = cat.orbits.iter().map(|o| o.ode_period(h, 1e-12).unwrap()).sum();
        vol_dev = vol_dev.max((ode - cat.volume).abs() / cat.volume);
        for d in action_derivative_check(h, *e, 1e-4, GRID).unwrap() {
            dw_dev = dw_dev.max(d.deviation);
        }
        for o in &cat.orbits {
            maslov_ok &= o.maslov == *sigma;
            let n = o.samples.len();
            let w0 = o.action_from_seed(h, 0);
            for s in [n / 7, n / 3, n / 2, 5 * n / 6] {
                seed_dev = seed_dev.max((o.action_from_seed(h, s) - w0).abs());
            }
        }
    }
    let ok = vol_dev < vol_tol && dw_dev < dw_tol && seed_dev < seed_tol && maslov_ok;
    outcome(
        ok,
        format!(
            "vol dev {vol_dev:.3e} (tol {vol_tol:e}), dW/dE dev {dw_dev:.3e} (tol {dw_tol:e}), \
             start-point dev {seed_dev:.3e} (tol {seed_tol:e}), Maslov {}",
            if maslov_ok { "ok" } else { "WRONG" }
        ),
    )
}

/// Smoothed counting function against its Fourier representation.
fn criterion_7() -> Outcome {
    let tol = 1e-6;
    let mut worst: f64 = 0.0;
    for n in [8, 16, 32, 64] {
        let g = sq(n);
        let spec = spectrum(&harper(g), &g);
        for (e, t) in [(1.0, 5.0), (-0.4, 12.0), (0.3, 20.0)] {
            let rho = make_test_function(t).unwrap();
            let q = 2 * fourier_quadrature_guard(&spec, &rho, e);
            worst = worst.max(fourier_identity_check(&spec, &rho, e, q).unwrap().deviation);
        }
    }
    outcome(worst < tol, format!("max |lhs - rhs| {worst:.3e} (tol {tol:e})"))
}

/// Poisson summation for the shipped smooth case.
fn criterion_8() -> Outcome {
    let (tol, min_ratio) = (1e-8, 10.0);
    let e32 = poisson_shipped(&sq(32), 1).unwrap().error;
    let e64 = poisson_shipped(&sq(64), 1).unwrap().error;
    let ok = e64 < tol && e32 / e64 > min_ratio;
    outcome(ok, format!("error N=32 {e32:.3e}, N=64 {e64:.3e} (tol {tol:e}), ratio {:.3e} (> {min_ratio})", e32 / e64))
}

/// Local eigenvalue bracketing on the Harper sweep, and Bohr–Sommerfeld exactness for potentials.
fn criterion_9() -> Outcome {
    let r = 0.3;
    let tol = 1e-10;
    // ten energies of each sign, clear of the saddle at E = 0 and the extrema at +-2
    let energies: Vec<f64> = (0..20)
        .map(|i| {
            let s = if i < 10 { -1.0 } else { 1.0 };
            s * (0.5 + 0.15 * (i % 10) as f64)
        })
        .collect();
    let (mut holds, mut bound, mut total) = (0, 0, 0);
    for n in [128, 256] {
        let g = sq(n);
        let h = harper(g);
        let spec = spectrum(&h, &g);
        for &e in &energies {
            let q = bracketing_check(&spec, &orbit_catalog(&h, e, GRID).unwrap(), r).unwrap();
            holds += q.bracketing_holds as usize;
            bound += q.orbit_bound_holds as usize;
            total += 1;
        }
    }
    let mut bs_worst: f64 = 0.0;
    let mut count_ok = true;
    for n in [32, 64] {
        let g = sq(n);
        let v = cos_potential(g);
        let window = (0.05, 0.95);
        let p = bs_predict(&v, window, &g, None).unwrap();
        let mut exact: Vec<f64> = (1..=n)
            .map(|m| v.eval(g.ell_x() * m as f64 / n as f64, 0.0))
            .filter(|&e| e > window.0 && e < window.1)
            .collect();
        exact.sort_by(f64::total_cmp);
        count_ok &= p.len() == exact.len();
        for (a, b) in p.iter().zip(&exact) {
            bs_worst = bs_worst.max((a.energy - b).abs());
        }
    }
    let ok = holds == total && bound == total && count_ok && bs_worst < tol;
    outcome(
        ok,
        format!(
            "bracketing {holds}/{total}, orbit bound {bound}/{total}; potential BS max deviation {bs_worst:.3e} \
             (tol {tol:e}), counts {}",
            if count_ok { "match" } else { "DIFFER" }
        ),
    )
}

/// Stationary-phase propagator for the cosine kinetic term, away from the fold.
fn criterion_10() -> Outcome {
    let (t, ratio_window) = (1.0, 0.5);
    let mut errs = Vec::new();
    for n in [32, 64, 128] {
        let g = sq(n);
        errs.push(van_vleck_row_error(&kinetic_cos(g), &g, t, 0, ratio_window).unwrap().0);
    }
    let ratios: Vec<f64> = errs.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|r| (1.5..=3.0).contains(r));
    outcome(ok, format!("RMS relative error [{}], ratios [{}] in [1.5, 3]", fmt_list(&errs), fmt_list(&ratios)))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("symbol-operator identity", criterion_1),
        ("exact spectra", criterion_2),
        ("closed-form quantisations", criterion_3),
        ("trace formula, potential only", criterion_4),
        ("trace formula, Harper", criterion_5),
        ("classical identities", criterion_6),
        ("Fourier self-consistency", criterion_7),
        ("Poisson summation", criterion_8),
        ("eigenvalue counting", criterion_9),
        ("Van Vleck propagator", criterion_10),
    ];
    let results: Vec<std::thread::Result<Outcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles.into_iter().map(|h| h.join()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), res)) in criteria.iter().zip(results).enumerate() {
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        failed += !pass as usize;
        println!("criterion {:>2} [{}] {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
