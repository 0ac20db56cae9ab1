//! One-step (influence-function) estimation of statistical functionals
//! along explicit distribution paths, with the numerical checks that go
//! with it: finite-difference oracles for influence functions, exact
//! second-order remainders, convergence-rate sweeps and Monte Carlo studies.

pub mod dist;
pub mod error;
pub mod functional;
pub mod estimate;
pub mod figures;
pub mod path;
pub mod rates;
pub mod score;
pub mod simulate;

pub use error::{Error, Result};
