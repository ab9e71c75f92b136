//! Floquet spectra of periodic linear functional differential equations.
//!
//! The library discretizes the characteristic operator `Δ(z)` of a periodic
//! linear FDE `ẋ(t) = L(t)x_t` on a trigonometric collocation grid, locates
//! its characteristic values (the Floquet exponents) with a contour-integral
//! eigensolver, extracts Jordan chains and multiplicities, and reconstructs
//! eigenfunctions and elementary solutions. Classical delay equations, delay
//! equations with infinite delay (exponentially weighted state space) and
//! mixed advance/delay equations are supported. An independent monodromy /
//! closed-form oracle is included for cross-validation of retarded problems.

pub mod charop;
pub mod cli;
pub mod expr;
pub mod grid;
pub mod model;
pub mod oracle;
pub mod periodic;
pub mod quad;
pub mod solutions;
pub mod spectrum;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
