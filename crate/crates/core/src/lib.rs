//! Synthesis and evaluation of regret-optimal measurement-feedback controllers
//! for discrete-time LTI plants, together with H2 (LQG) and H-infinity
//! baselines and a finite-horizon block-Toeplitz verification oracle.
//!
//! The synthesis pipeline: validate the plant assumptions, compute the
//! canonical spectral factorizations, split the resulting transfer matrix
//! into causal and strictly anticausal parts, solve the Nehari problem for
//! the anticausal part, and bisect on the regret level until the Hankel
//! norm hits one. The optimal regret is the square of the returned level.

pub mod decomposition;
pub mod error;
pub mod evaluation;
pub mod factorization;
pub mod linalg;
pub mod nehari;
pub mod oracle;
pub mod solvers;
pub mod synthesis;
pub mod sysmodel;

pub use error::Error;
pub use linalg::{CMat, Mat};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
