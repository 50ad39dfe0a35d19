//! Online Riccati update for online linear-quadratic control.
//!
//! The crate is organized bottom-up:
//!
//! - [`matcore`]: dense matrix primitives (norms, spectra, square roots).
//! - [`lyapunov`]: discrete Stein equations `P = FᵀPF + V` and `X = FXFᵀ + V`.
//! - [`riccati`]: feedback gains, the Riccati difference map, Newton-Hewer and a DARE solver.
//! - [`stability`]: strong-stability certificates and covariance-decay bounds.
//! - [`plant`]: the controlled linear system, rollouts and expected-cost accounting.
//! - [`online`]: the online Riccati update itself.
//! - [`bench`]: cost generators, comparators, regret ledgers and experiment drivers.
//! - [`io`]: matrix text files and CSV output.

pub mod bench;
pub mod error;
pub mod io;
pub mod lyapunov;
pub mod matcore;
pub mod online;
pub mod plant;
pub mod riccati;
pub mod stability;

pub use error::{Error, Result};
pub use matcore::{Mat, SymMat};
