//! Z-similarity matrices for comparing units (readers, centers, surgeons)
//! through the relative likelihood of their estimates, with nonparametric
//! mixtures, random-intercept logistic regression and null simulations as
//! companions.

pub mod cli;
pub mod error;
pub mod likelihood;
pub mod mixedlogit;
pub mod npml;
pub mod paperdata;
pub mod render;
pub mod simtest;
pub mod zmatrix;

pub use error::{Error, Result};
pub use likelihood::{Family, ParamVector, Response, UnitObservations};
pub use zmatrix::{compute_z, diagnostics, ZDiagnostics, ZMatrix};
