//! Discrete nonlocal generalized porous medium equations
//! `∂_t u − 𝔏[φ(u)] = f` on uniform grids.
//!
//! The pieces: Lévy measures ([`levy`]), their discretizations into
//! finite-difference operators ([`operator`]), monotone nonlinearities
//! ([`nonlinearity`]), the implicit solve ([`elliptic`]), the explicit/implicit
//! time stepper ([`stepper`]) and numerical studies ([`harness`]).

// `!(x > 0.0)` style guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elliptic;
pub mod error;
pub mod grid;
pub mod harness;
pub mod levy;
pub mod nonlinearity;
pub mod operator;
pub mod quadrature;
pub mod special;
pub mod stepper;

pub use error::{Error, Result};
pub use grid::{Field, TimeGrid, UniformGrid};
pub use levy::LevyMeasureSpec;
pub use nonlinearity::{LipschitzBound, Monotone, Nonlinearity};
pub use operator::DiscreteOperator;
pub use stepper::{run, CflPolicy, SchemeConfig, Source, Trajectory};
