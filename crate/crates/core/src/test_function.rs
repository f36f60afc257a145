//! Smooth bump test functions with compactly supported Fourier transform.
//!
//! Convention: `rho_hat(t) = int rho(x) e^{-i t x} dx`, hence
//! `rho(x) = (1/2 pi) int rho_hat(t) e^{i x t} dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Minimum number of Gauss–Legendre panels on `[0, T]` when evaluating `rho`.
const MIN_PANELS: usize = 10;

/// `rho_hat(t) = A exp(1 - 1/(1 - (t/T)^2))` on `|t| < T`, zero elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    support_t: f64,
    amplitude: f64,
}

/// Unit-height bump supported on `[-T, T]`.
pub fn make_test_function(support_t: f64) -> Result<TestFunction> {
    TestFunction::new(support_t, 1.0)
}

impl TestFunction {
    pub fn new(support_t: f64, amplitude: f64) -> Result<Self> {
        if !(support_t > 0.0 && support_t.is_finite()) {
            return Err(Error::Spec(format!("test-function support must be positive, got {support_t}")));
        }
        if !amplitude.is_finite() {
            return Err(Error::Spec("test-function amplitude must be finite".into()));
        }
        Ok(Self { support_t, amplitude })
    }

    pub fn support(&self) -> f64 {
        self.support_t
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn rho_hat(&self, t: f64) -> f64 {
        let u = t / self.support_t;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        self.amplitude * (1.0 - 1.0 / (1.0 - u * u)).exp()
    }

    /// `rho(x) = (1/pi) int_0^T rho_hat(t) cos(x t) dt`, panels scaled with `|x| T`.
    pub fn rho(&self, x: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let t = self.support_t;
        let panels = MIN_PANELS.max((x.abs() * t / (0.5 * PI)).ceil() as usize);
        let gl = GaussLegendre::standard();
        gl.integrate_composite(0.0, t, panels, |s| self.rho_hat(s) * (x * s).cos()) / PI
    }
}
