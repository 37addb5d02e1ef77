use thiserror::Error;

/// Errors surfaced by the simulation and verification kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid lattice geometry or budget request.
    #[error("lattice: {0}")]
    Lattice(String),

    /// A function that must be admissible (nonnegative, bounded, integrable)
    /// is not.
    #[error("function is not admissible: {0}")]
    NotAdmissible(String),

    /// The support of a scaled function does not fit on the target lattice.
    #[error("support overflow: scaled support [{0}, {1}) exceeds target length {2}")]
    SupportOverflow(f64, f64, f64),

    /// Two objects that must share a lattice do not.
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    /// Invalid time argument.
    #[error("invalid time: {0}")]
    InvalidTime(String),

    /// Time sequence not ordered as required.
    #[error("time ordering violated: {0}")]
    TimeOrdering(String),

    /// The marching solver failed to converge.
    #[error("solver diverged at step {step} (t = {time}): {detail}")]
    SolverDiverged {
        step: usize,
        time: f64,
        detail: String,
    },

    /// A stochastic backend produced a non-finite value.
    #[error("non-finite value in {backend} backend at step {step}, cell {cell}")]
    NonFinite {
        backend: &'static str,
        step: usize,
        cell: usize,
    },

    /// The particle population exceeded its configured cap.
    #[error("particle population {count} exceeded cap {cap} at step {step}")]
    PopulationExplosion {
        step: usize,
        count: usize,
        cap: usize,
    },

    /// Not enough data points for the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}
