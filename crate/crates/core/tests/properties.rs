use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use torus_trace::bohr_sommerfeld::{n_min_max, omega_roots, q_function, reduce_2pi};
use torus_trace::orbits::orbit_catalog;
use torus_trace::quantize::{translation_op, weyl_op};
use torus_trace::symbols::harper;
use torus_trace::{unwrap_step, wrap, FourierSymbol, LiftedPoint, TorusGeometry};

fn geom() -> impl Strategy<Value = TorusGeometry> {
    (2usize..24, 0.5f64..8.0, 0.5f64..8.0).prop_map(|(n, a, b)| TorusGeometry::new(a, b, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wrap_lands_in_period(x in -1e4f64..1e4, l in 0.1f64..10.0) {
        let w = wrap(x, l);
        prop_assert!((0.0..l).contains(&w));
        let k = ((x - w) / l).round();
        prop_assert!((x - w - k * l).abs() < 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn unwrap_recovers_small_steps(x in -20.0f64..20.0, xi in -20.0f64..20.0, dx in -1.5f64..1.5, dxi in -1.5f64..1.5) {
        let g = TorusGeometry::square(8).unwrap();
        let prev = LiftedPoint::from_covering(x, xi, &g);
        let next = unwrap_step(&prev, g.project(x + dx, xi + dxi), &g).unwrap();
        prop_assert!((next.x - x - dx).abs() < 1e-11 && (next.xi - xi - dxi).abs() < 1e-11);
    }

    #[test]
    fn translations_are_unitary(g in geom(), m in -5i64..5, n in -5i64..5) {
        prop_assert!(translation_op(&g, m, n).unitarity_defect() < 1e-12);
    }

    #[test]
    fn real_symbols_give_hermitian_operators(g in geom(), re in -1.0f64..1.0, im in -1.0f64..1.0, m in -3i64..3, n in -3i64..3) {
        // the zero mode is its own partner and must be real
        let im = if (m, n) == (0, 0) { 0.0 } else { im };
        let s = FourierSymbol::from_coeffs(g, [((m, n), Complex64::new(re, im))], "random").unwrap();
        let a = weyl_op(&s, &g).unwrap();
        let e = a.entries();
        let defect = (e - e.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(defect < 1e-13);
    }

    #[test]
    fn reduce_convention(z in -1e3f64..1e3) {
        let r = reduce_2pi(z);
        prop_assert!(r > -PI && r <= PI);
        prop_assert!(((z - r) / (2.0 * PI) - ((z - r) / (2.0 * PI)).round()).abs() < 1e-9);
    }

    #[test]
    fn roots_are_evenly_spaced(lo in -10.0f64..0.0, width in 0.1f64..20.0) {
        let g = TorusGeometry::square(32).unwrap();
        let cat = orbit_catalog(&harper(g), 1.0, 64).unwrap();
        let o = &cat.orbits[0];
        let roots = omega_roots(o, g.hbar(), lo, lo + width);
        for w in roots.windows(2) {
            prop_assert!((w[1] - w[0] - 2.0 * PI / o.period_primitive).abs() < 1e-9);
        }
        // Q increases by exactly the number of roots between the window ends, on top of its
        // linear drift
        let dq = q_function(&cat, g.hbar(), lo + width) - q_function(&cat, g.hbar(), lo);
        let drift = -width * o.period_primitive / (2.0 * PI);
        let on_root = roots.iter().any(|&r| (r - lo).abs() < 1e-9 || (r - lo - width).abs() < 1e-9);
        if !on_root {
            prop_assert!((dq - drift - roots.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn window_counts_monotone_in_r(r in 0.01f64..2.0, dr in 0.0f64..1.0) {
        let g = TorusGeometry::square(64).unwrap();
        let cat = orbit_catalog(&harper(g), -0.8, 64).unwrap();
        let a = n_min_max(&cat, g.hbar(), r);
        let b = n_min_max(&cat, g.hbar(), r + dr);
        prop_assert!(a.n_min <= a.n_max);
        prop_assert!(a.n_min <= b.n_min && a.n_max <= b.n_max);
    }
}
