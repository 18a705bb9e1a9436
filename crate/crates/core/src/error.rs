//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by solvers, factorizations and synthesis.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix not positive definite (min eigenvalue {min_eig:.6e}): {context}")]
    NotPositiveDefinite { context: String, min_eig: f64 },

    #[error(
        "no stabilizing solution: pencil eigenvalue {eig_re}{eig_im:+}i at distance {dist:.3e} from the unit circle"
    )]
    NoStabilizingSolution { eig_re: f64, eig_im: f64, dist: f64 },

    #[error("iteration failed to converge ({context}), residual {residual:.3e}")]
    NonConvergence { context: String, residual: f64 },

    #[error("matrix equation has no solution: {0}")]
    NoSolution(String),

    #[error("evaluation point z = {z_re}{z_im:+}i is within {dist:.3e} of a pole")]
    NearSingular { z_re: f64, z_im: f64, dist: f64 },

    #[error("gamma = {gamma:.6e} is infeasible: {reason}")]
    GammaInfeasible { gamma: f64, reason: String },

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("internal instability detected: {0}")]
    InternalInstability(String),

    #[error("simulation diverged: state norm {norm:.3e} at step {step}")]
    Divergence { step: usize, norm: f64 },

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("invalid plant: {0}")]
    InvalidPlant(String),

    #[error("plant violates standing assumptions: {0}")]
    AssumptionViolated(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl Error {
    /// True for error classes that signal "this regret level is not
    /// achievable" rather than a numerical or usage defect. The gamma
    /// bisection treats these as an infeasible probe, everything else
    /// as a hard failure.
    pub fn is_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::GammaInfeasible { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NoStabilizingSolution { .. }
        )
    }
}
