//! Exact Fock-space simulation of the reduced BCS pairing model on a small
//! set of plane-wave modes: gap equations, Bogoliubov states, second-order
//! corrected states and brute-force checks of the closed-form energies.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod fock;
pub mod gapsolve;
pub mod hamiltonian;
pub mod analysis;
pub mod cli;
pub mod model;
pub mod states;

pub use error::{Error, Result};
