//! Numerical laboratory for the conjugated Schrödinger multiplier S_ν,
//! its Strichartz and gain estimates, Birman–Schwinger operators, CGO
//! solutions, the initial-to-final-state map and Born reconstruction.
//!
//! Everything lives on a periodic space-time lattice (see [`grid`]).

pub mod birman_schwinger;
pub mod cgo;
pub mod counterexample;
pub mod estimates;
pub mod forward;
pub mod grid;
pub mod kernels;
pub mod multipliers;
pub mod quad;
pub mod reconstruction;
pub mod report;
pub mod symbols;

pub use num_complex::Complex64 as C64;
