//! Spectral-Galerkin laboratory for the stochastic generalized Burgers equation
//!
//! ```text
//! dx = (Δx + F(x)) dt + √A dw,    x(t) ∈ L²(0,1),  x(t,0) = x(t,1) = 0,
//! ```
//!
//! with F(x)(r) = d/dr Ψ(x(r)) + Φ(r, x(r)), and for its Kolmogorov operator
//!
//! ```text
//! L u(x) = ½ Tr(A D²u(x)) + (Δx + F(x), Du(x))
//! ```
//!
//! acting on finitely based C² test functions. The crate provides the sine
//! eigenbasis and Galerkin projections, the regularized bounded drifts F_N,
//! Lyapunov weights V and Θ with their exact derivatives and drift constants,
//! an exact-in-the-linear-part SDE integrator with counter-based seeding,
//! Monte-Carlo semigroup/resolvent estimators, ergodic averaging, a 1-D
//! resolvent oracle, and a configuration-driven check runner.

pub mod checks;
pub mod cli;
pub mod config;
pub mod cylinder;
pub mod drift;
pub mod ergodic;
pub mod lyapunov;
pub mod oracle1d;
pub mod rng;
pub mod sde;
pub mod semigroup;
pub mod spectral;
pub mod util;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("selection failure: {0}")]
    Selection(String),
    #[error("ensemble error: {0}")]
    Ensemble(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
