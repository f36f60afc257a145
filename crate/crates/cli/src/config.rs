use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use torus_trace::{Error, ModelSpec, Result, TorusGeometry};

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub ell_x: f64,
    pub ell_xi: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { ell_x: 2.0 * PI, ell_xi: 2.0 * PI }
    }
}

/// Test-function support: absolute `T`, or a multiple of the shortest primitive period.
#[derive(Clone, Copy, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rho {
    #[serde(rename = "T")]
    pub t: Option<f64>,
    pub period_factor: Option<f64>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    #[serde(default = "default_r")]
    pub r: f64,
    pub k_max: Option<usize>,
}

fn default_r() -> f64 {
    0.3
}

impl Default for Windows {
    fn default() -> Self {
        Self { r: default_r(), k_max: None }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BsOptions {
    #[serde(rename = "E_window")]
    pub e_window: Option<(f64, f64)>,
    pub k_range: Option<(i64, i64)>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntiWickOptions {
    #[serde(default = "default_quad")]
    pub quad: usize,
    #[serde(default = "default_trunc")]
    pub n_trunc: usize,
}

fn default_quad() -> usize {
    512
}

fn default_trunc() -> usize {
    8
}

impl Default for AntiWickOptions {
    fn default() -> Self {
        Self { quad: default_quad(), n_trunc: default_trunc() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonOptions {
    #[serde(default = "default_nu")]
    pub nu: i64,
}

fn default_nu() -> i64 {
    1
}

impl Default for PoissonOptions {
    fn default() -> Self {
        Self { nu: default_nu() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorOptions {
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    /// Row of the Van Vleck comparison.
    #[serde(default)]
    pub row: i64,
    /// Keep elements with `|dx| <= ratio * t * max|H'|`.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
}

fn default_times() -> Vec<f64> {
    vec![1.0]
}

fn default_ratio() -> f64 {
    0.5
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { times: default_times(), row: 0, ratio: default_ratio() }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub energies: Vec<f64>,
    #[serde(default)]
    pub rho: Rho,
    #[serde(default)]
    pub windows: Windows,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default = "default_grid")]
    pub grid_res: usize,
    #[serde(default)]
    pub bs: BsOptions,
    #[serde(default)]
    pub antiwick: AntiWickOptions,
    #[serde(default)]
    pub poisson: PoissonOptions,
    #[serde(default)]
    pub propagator: PropagatorOptions,
}

fn default_grid() -> usize {
    256
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Spec("N_list must be nonempty".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::Spec(format!("N = {n} in N_list is below 2")));
        }
        if !(self.windows.r > 0.0) {
            return Err(Error::Spec("windows.r must be positive".into()));
        }
        if self.rho.t.is_some() && self.rho.period_factor.is_some() {
            return Err(Error::Spec("rho takes either T or period_factor, not both".into()));
        }
        TorusGeometry::new(self.geometry.ell_x, self.geometry.ell_xi, 2)?;
        Ok(())
    }

    pub fn require_energies(&self) -> Result<()> {
        if self.energies.is_empty() {
            return Err(Error::Spec("energies must be nonempty for this command".into()));
        }
        Ok(())
    }

    pub fn geom(&self, n: usize) -> Result<TorusGeometry> {
        TorusGeometry::new(self.geometry.ell_x, self.geometry.ell_xi, n)
    }
}
