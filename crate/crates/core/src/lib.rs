//! Fractional-moment localization laboratory for discrete alloy-type
//! random Schrödinger operators `H = -Δ + λ Σ_k ω_k u(· - k)` on `Z^d`.
//!
//! The crate assembles finite-volume Hamiltonians, evaluates Green
//! functions and the resolvent identities used by the fractional moment
//! method, checks the spectral-averaging inequalities, and runs the Monte
//! Carlo experiments (a-priori bounds, decay profiles, the finite-volume
//! criterion, Wegner counts, two-box regularity, eigenvector localization).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod error;
pub mod fmm;
pub mod fuzz;
pub mod geometry;
pub mod linalg;
pub mod localization;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod resolvent;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{Region, Site, SiteSet};
pub use model::{AlloyModel, Density, DisorderField, LatticeOperator, SingleSitePotential};
pub use montecarlo::Workers;
