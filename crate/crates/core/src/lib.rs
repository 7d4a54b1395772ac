//! Spectral subspaces, Brown measures and Fuglede-Kadison determinants for
//! complex matrices.
//!
//! A square complex matrix is treated as an element of a finite factor
//! with the normalized trace `tau = Tr / n`. On top of a small dense
//! kernel ([`linalg`]) the crate provides:
//!
//! * [`brown`]: the Fuglede-Kadison determinant, Brown measures (atomic and
//!   regularized) and power-moment limits;
//! * [`flow`]: the normalizing double-bracket flow `X' = [[X*, X], X]`;
//! * [`subspace`]: power-limit operators and the spectral subspaces
//!   `E(T, r)`, `F(T, r)` and `K_T(B)`;
//! * [`riesz`]: contour Riesz projections via node sums on the unit circle;
//! * [`integrate`]: dyadic Riemann sums for Hoelder paths in Schatten
//!   quasi-norms;
//! * [`unitary`]: the graph unitary `u(T)` and its factorizations;
//! * [`lab`]: random-matrix experiments for free perturbations;
//! * [`io`]: matrix files, grid/path specs and JSON output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brown;
pub mod error;
pub mod flow;
pub mod integrate;
pub mod io;
pub mod lab;
pub mod linalg;
pub mod power;
pub mod riesz;
pub mod subspace;
pub mod unitary;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use linalg::{c64, CMatrix};
