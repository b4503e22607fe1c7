use thiserror::Error;

/// Errors raised by the discrete operators, energies and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("field contains a non-finite value at node {node}")]
    NonFiniteField { node: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fractional order {0} outside the admissible range")]
    InvalidOrder(f64),

    #[error("invalid psi: {0}")]
    InvalidPsi(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeError { expected: String, found: String },

    #[error("candidate field is negative at interior node {node} (value {value})")]
    NegativeCandidate { node: usize, value: f64 },

    #[error("argument t = {0} outside the domain t > 0")]
    DomainError(f64),

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("no two-root fibering structure (gap = {gap:e}, degenerate = {degenerate})")]
    NoTwoRootStructure { gap: f64, degenerate: bool },

    #[error("the zero field is not admissible here")]
    ZeroField,

    #[error("lambda = {lambda} too large: no two-root structure after {attempts} attempts")]
    LambdaTooLarge { lambda: f64, attempts: usize },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("two-solution solve failed: {reason}")]
    TwoSolutionFailure {
        reason: String,
        plus: Option<Box<crate::solver::SolveResult>>,
        minus: Option<Box<crate::solver::SolveResult>>,
    },

    #[error("unknown oracle quantity `{0}`")]
    UnknownQuantity(String),

    #[error("invalid coefficient data: {0}")]
    Coefficient(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
