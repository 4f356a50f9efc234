//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by kernel construction, quadrature, the moment/spectral
/// solvers, the particle engine, and the scenario harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Adaptive quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: {nodes} nodes, last relative change {last_change:.3e}")]
    QuadratureNonConvergence { nodes: usize, last_change: f64 },

    /// A kernel failed validation (negative b, b ≡ 0, bad table, γ out of range).
    #[error("invalid collision kernel: {0}")]
    InvalidKernel(String),

    /// A configuration value failed validation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Scatter-direction sampling needs a nonzero relative velocity.
    #[error("degenerate collision pair: v and v_star coincide")]
    DegeneratePair,

    /// The moment operator has an eigenvalue too close to zero for a
    /// source-driven closed form (happens exactly at the threshold K = K0).
    #[error("moment operator resonant at K = {k}: eigenvalue within {tol:.1e} of 0")]
    ResonantOperator { k: f64, tol: f64 },

    /// Stationary solve hit a (numerically) singular system.
    #[error("stationary moment system singular at K = {k}")]
    SingularSystem { k: f64 },

    /// The closed-form trace solution only exists without shear.
    #[error("trace closed form requires K = 0, got K = {0}")]
    TraceNeedsZeroShear(f64),

    /// Povzner constant search exceeded the sanity bound 2^16.
    #[error("Povzner constant search exceeded 2^16 (worst ratio {worst_ratio:.3e})")]
    PovznerSearchFailed { worst_ratio: f64 },

    /// The thinning acceptance probability exceeded 1: the majorant was not
    /// actually a majorant. Carries diagnostics for the offending candidate.
    #[error(
        "majorant violation: acceptance {acceptance:.6} > 1 at t = {t:.6} \
         (speed {speed:.6}, envelope speed {envelope_speed:.6})"
    )]
    MajorantViolation {
        t: f64,
        speed: f64,
        envelope_speed: f64,
        acceptance: f64,
    },

    /// A particle velocity left the representable range.
    #[error("non-finite velocity for particle {index} at t = {t}")]
    NonFiniteVelocity { index: usize, t: f64 },

    /// Growing-mode quantities requested at or below the threshold.
    #[error("K = {k} is not supercritical (threshold K0 = {k0})")]
    NotSupercritical { k: f64, k0: f64 },

    /// Measure reconstruction requires m11 − m12 > 0, m22 − m12 > 0, m33 > 0.
    #[error("reconstruction precondition violated: {0}")]
    ReconstructionDomain(String),

    /// A trajectory was too short for the requested window statistics.
    #[error("trajectory too short: {len} entries, need at least {needed}")]
    TrajectoryTooShort { len: usize, needed: usize },

    /// Unknown test function, scenario, or preset name.
    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
