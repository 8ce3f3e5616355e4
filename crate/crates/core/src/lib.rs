//! Numerical toolkit for the path-dependent heat equation
//! `∂_t u + ∫ D^⊥u d⁻η + ½σ² D²u({0,0}) = 0`.
//!
//! - [`path`]: paths, trajectories, measures and second-derivative kernels.
//! - [`regcalc`]: deterministic forward integrals via regularization.
//! - [`cylindrical`]: explicit solution for cylindrical terminal conditions.
//! - [`flow`]: functional Brownian and Markovian stochastic flows.
//! - [`smooth`]: Monte Carlo solution for smooth terminal functionals.
//! - [`clark_ocone`]: pathwise check of the martingale representation.

pub mod error;
pub mod cylindrical;
pub mod path;
pub mod quadrature;
pub mod regcalc;
pub mod rng;
pub mod stats;
pub mod flow;
pub mod smooth;
pub mod clark_ocone;

pub use error::{Error, Result};
