//! Dissipativity analysis for linear time-varying systems
//!
//! ```text
//! ẋ = A(t)x + B(t)u,    y = C(t)x + D(t)u
//! ```
//!
//! The crate covers port-Hamiltonian representations, pointwise and
//! integral KYP inequalities, Riccati-based available storage, discretized
//! Popov operators and the state, input-output and time transformations
//! under which all of these are invariant.
//!
//! Coefficients are matrices of symbolic [`expr::TimeExpr`] entries, so
//! derivatives such as `Q̇` are exact rather than finite differences.
//! Quantities that have no closed form (inverses, Cholesky factors,
//! Riccati solutions) are carried as numeric [`MatrixFunction`]s that
//! still report their first derivative.

pub mod apps;
pub mod dissipativity;
mod error;
pub mod expr;
pub mod hermlin;
pub mod ltv;
pub mod ph;
pub mod popov;
pub mod quad;
pub mod transforms;

pub use error::{Error, Result};
pub use expr::TimeExpr;
pub use hermlin::HermMatrix;
pub use ltv::{LtvSystem, MatrixFunction, Trajectory};

pub type C64 = num_complex::Complex64;
pub type CMat = nalgebra::DMatrix<C64>;
pub type CVec = nalgebra::DVector<C64>;

/// Default relative tolerance for adaptive integration.
pub const DEFAULT_RTOL: f64 = 1e-8;
/// Default absolute tolerance for adaptive integration.
pub const DEFAULT_ATOL: f64 = 1e-10;
