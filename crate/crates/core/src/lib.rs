//! Quantisation of observables on the 2-torus, classical periodic-orbit data, and
//! numerical checks of the semiclassical trace formula and Bohr–Sommerfeld counting.

pub mod bohr_sommerfeld;
pub mod error;
pub mod flow;
pub mod format;
pub mod orbits;
pub mod quadrature;
pub mod quantize;
pub mod spectral;
pub mod symbols;
pub mod test_function;
pub mod torus;
pub mod trace_formula;

pub use error::{Error, Result};
pub use symbols::{build_model, FourierSymbol, ModelKind, ModelSpec};
pub use torus::{unwrap_step, wrap, LiftedPoint, TorusGeometry};
