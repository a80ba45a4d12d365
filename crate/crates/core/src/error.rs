use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit index {index} out of range for {qubits} qubits")]
    IndexOutOfRange { index: usize, qubits: usize },

    /// A jump from `W_q` to `W_n` needs `n <= 4q`.
    #[error("jump infeasible: q={q} -> n={n} violates n <= 4q (jump more than 4x is not allowed)")]
    JumpInfeasible { q: usize, n: usize },

    #[error("resonance singularity at kd={kd}, kd0={kd0}, gamma={gamma}, omega={omega} (cascade step {step})")]
    ResonanceSingularity {
        kd: f64,
        kd0: f64,
        gamma: f64,
        omega: f64,
        step: usize,
    },

    #[error("Kraus extraction inconsistent: completeness defect {defect:e}")]
    ExtractionInconsistency { defect: f64 },

    #[error("trace drift {drift:e} at electron {electron}")]
    TraceDrift { drift: f64, electron: usize },

    #[error("positivity violated: min eigenvalue {min_eigenvalue:e} at electron {electron}")]
    PositivityViolation { min_eigenvalue: f64, electron: usize },

    #[error("no maximum found after {electrons} electrons ({reason})")]
    Stall {
        electrons: usize,
        reason: String,
        trace: Box<crate::trace::EvolutionTrace>,
    },

    #[error("matrix logarithm branch ambiguity: eigenphase {phase} too close to ±pi; reduce omega")]
    BranchCut { phase: f64 },

    #[error("calibration unreliable: {0}")]
    CalibrationUnreliable(String),

    #[error("excitation preparation failed: flip fidelity {fidelity} below {threshold}")]
    PreparationFailure { fidelity: f64, threshold: f64 },

    #[error("stage {stage} ({q} -> {n}): {source}")]
    Stage {
        stage: usize,
        q: usize,
        n: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
