//! Time-ordering corrections to the joint spectral amplitude of photon pairs
//! and to frequency conversion, in the all-Gaussian model, together with the
//! numerical oracles that check every closed form.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod fconv;
pub mod jsa;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
pub use jsa::{ComplexKernel, Detuning};
pub use model::{CentralFrequencies, DerivedParams, GaussianConfig, PhysicalSetup, Process};
pub use num_complex::Complex64;
pub use quad::QuadratureSpec;
