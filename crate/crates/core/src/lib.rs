//! Workbench for the RankOne communication problem.
//!
//! `RankOne_n(A, B) = 1` iff `A ⊕ B` has F₂-rank at most one. The crate
//! contains everything needed to simulate and check the objects built around
//! it:
//!
//! * [`f2`]: bit-packed F₂ matrices, rank, rank-≤1 decomposition and enumeration.
//! * [`problems`]: communication problems as predicates, plus materialization.
//! * [`pdt`]: parity decision trees and the constant-query randomized tester.
//! * [`eqproto`]: Equality-oracle protocols, deterministic and non-deterministic.
//! * [`fourier`]: exact Walsh–Hadamard spectra and (approximate) spectral norms.
//! * [`counting`]: the rank-≤1 triple census and the Hölder lower bound on γ₂.
//! * [`blocky`]: blocky matrices, fractional blocky covers and rounding.
//! * [`lpsolve`]: a dense two-phase simplex used by `fourier` and `blocky`.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod blocky;
pub mod checks;
pub mod counting;
pub mod eqproto;
pub mod error;
pub mod f2;
pub mod fourier;
pub mod lpsolve;
pub mod par;
pub mod pdt;
pub mod problems;
pub mod rng;

pub use error::{Result, XorError};
pub use f2::F2Matrix;
pub use problems::{BoolMatrix, Problem, XorProblem};
