//! Endemic-equilibrium atlas for the diffusive SIS model with mass-action
//! transmission on a 1-D interval with no-flux boundaries.
//!
//! The pipeline runs bottom-up: [`spectral`] gives the threshold `l* = 1/R1`,
//! [`logistic`] traces the family `u^l` for `l > l*`, [`curves`] turns that
//! family into the scalar curves whose level sets are the endemic
//! equilibria, and [`dynamics`] integrates the full parabolic system to
//! check the static picture.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod curves;
pub mod domain;
pub mod dynamics;
pub mod error;
pub mod logistic;
pub mod perturbation;
pub mod report;
pub mod spectral;
pub mod tridiag;

pub use domain::{Field, Grid, NeumannLaplacian};
pub use error::{AtlasError, Result};
pub use spectral::{CoefficientSet, EigenPair, Population};
