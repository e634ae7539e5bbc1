use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator contains non-finite entries")]
    NonFinite,

    #[error("operator stack is empty")]
    EmptyStack,

    #[error("{what} = {value} is out of range ({allowed})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        allowed: String,
    },

    #[error("cluster size {cluster_size} does not divide register size {num_qubits}")]
    ClusterSize {
        num_qubits: usize,
        cluster_size: usize,
    },

    #[error("invalid cluster partition: {0}")]
    Partition(String),

    #[error("{0} is not Hermitian (deviation {1:.3e})")]
    NotHermitian(&'static str, f64),

    #[error("{0} is not positive semidefinite (minimum eigenvalue {1:.3e})")]
    NotPositive(&'static str, f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("generators are linearly dependent (smallest Gram singular value {0:.3e})")]
    LinearlyDependent(f64),

    #[error("generator set is not closed under commutation: [F_{alpha}, F_{beta}] has residual {residual:.3e}")]
    NotClosed {
        alpha: usize,
        beta: usize,
        residual: f64,
    },

    #[error("integration unstable: trace drifted by {drift:.3e} at t = {time}; use a smaller step")]
    StepInstability { time: f64, drift: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),
}
