//! Independent numerical oracles: direct quadrature of the third-order
//! Magnus integral and a truncated-Fock time-ordered propagator.

pub mod fock;
pub mod fquad;

pub use fock::*;
pub use fquad::{f_function, oracle_j3};
