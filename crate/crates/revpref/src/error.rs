//! Crate-wide error type.

use crate::relations::CycleWitness;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- data ingestion ----
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: malformed record: {msg}")]
    Malformed { row: usize, msg: String },
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("row {row}: expected {expected} goods, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: price component {component} is not strictly positive ({value})")]
    NonpositivePrice {
        row: usize,
        component: usize,
        value: f64,
    },
    #[error("row {row}: quantity component {component} is negative ({value})")]
    NegativeQuantity {
        row: usize,
        component: usize,
        value: f64,
    },
    #[error("row {row}: observation has zero expenditure")]
    ZeroExpenditure { row: usize },
    #[error("choices row {row}: period {period:?} not present in the price file")]
    UnknownPeriod { row: usize, period: String },
    #[error("period {period:?} has no choices")]
    EmptyPeriod { period: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cost matrix invalid: {0}")]
    BadCostMatrix(String),

    // ---- model preconditions ----
    #[error("data set violates GARP")]
    GarpViolation { witness: CycleWitness },
    #[error("data set violates GAPP")]
    GappViolation { witness: CycleWitness },
    #[error(
        "genericity failure: expenditure gap between observations {t} and {t_other} is zero"
    )]
    GenericityFailure { t: usize, t_other: usize },
    #[error("bundle dimension {found} does not match data dimension {expected}")]
    BundleDimension { expected: usize, found: usize },
    #[error("normalized choice lies on the boundary of budget {budget} (vs budget class {other})")]
    OnBoundary { budget: usize, other: usize },
    #[error("no patch matches the sign vector of the choice on budget {budget}")]
    NoMatchingPatch { budget: usize },
    #[error("type enumeration exceeded the cap of {cap} columns (reached {reached})")]
    TypeBudgetExceeded { cap: usize, reached: usize },
    #[error("indicator vector is constant; the welfare parameter is degenerate")]
    ConstantRho,
    #[error("theta {theta} outside the identified parameter range [{lo}, {hi}]")]
    ThetaOutOfRange { theta: f64, lo: f64, hi: f64 },
    #[error("constraint set is infeasible: {0}")]
    Infeasible(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    // ---- solver failures ----
    #[error("linear program stalled after {iterations} iterations ({phase}); basis: {basis:?}")]
    LpStall {
        iterations: usize,
        phase: &'static str,
        basis: Vec<usize>,
    },
    #[error("active-set solver exceeded {cap} iterations")]
    IterationCap { cap: usize },
    #[error("internal solver error: {0}")]
    Internal(String),
}

impl Error {
    /// Process exit code used by the command-line frontend: 1 for input
    /// errors, 2 for model infeasibility where feasibility was required,
    /// 3 for internal solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::GarpViolation { .. }
            | Error::GappViolation { .. }
            | Error::Infeasible(_)
            | Error::ConstantRho => 2,
            Error::LpStall { .. } | Error::IterationCap { .. } | Error::Internal(_) => 3,
            _ => 1,
        }
    }
}
