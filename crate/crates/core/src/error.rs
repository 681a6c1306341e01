use thiserror::Error;

/// Errors raised anywhere in the simulation toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected} qubits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("qubit index {index} out of range for {n} qubits")]
    QubitOutOfRange { index: usize, n: usize },

    #[error("gate operands must be distinct (qubit {0} repeated)")]
    RepeatedOperand(usize),

    #[error("gate {0} is not a supported Clifford")]
    NonClifford(String),

    #[error("gate {0} has no unitary representation")]
    NonUnitaryGate(String),

    #[error("invalid Pauli label {0:?}")]
    InvalidLabel(String),

    #[error("probability {name} = {value} outside [0, 1]")]
    ProbabilityOutOfRange { name: String, value: f64 },

    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },

    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unsupported Trotter order {0}")]
    UnsupportedOrder(usize),

    #[error("term {term} couples non-adjacent qubits or acts on more than two qubits")]
    NonLocalTerm { term: String },

    #[error("{n} qubits is too large for dense evaluation (limit {limit})")]
    TooLarge { n: usize, limit: usize },

    #[error("layer contains a parameterized non-Z rotation at gate {0}")]
    NonZRotation(usize),

    #[error("expected {expected} insertion layers, got {actual}")]
    InsertionCount { expected: usize, actual: usize },

    #[error("subgroup tiling error: {0}")]
    Tiling(String),

    #[error("missing probe {0}")]
    MissingProbe(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("target rate {rate} for {label} requires a noise channel the device does not have")]
    MissingChannel { label: String, rate: f64 },

    #[error("target rate {rate} for {label} exceeds the available rate {available} at dt = {dt}")]
    RateUnreachable {
        label: String,
        rate: f64,
        available: f64,
        dt: f64,
    },

    #[error("integrator unstable: trace drift {drift:.3e} at t = {time}")]
    Unstable { drift: f64, time: f64 },

    #[error("time grids differ: {0} vs {1} points")]
    GridMismatch(usize, usize),

    #[error("empty sample set")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::ProbabilityOutOfRange {
            name: name.to_string(),
            value,
        });
    }
    Ok(())
}

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
