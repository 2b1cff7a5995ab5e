use thiserror::Error;

/// Crate-wide error type covering model validation, solver, and I/O failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate identifier: {0}")]
    DuplicateId(String),
    #[error("claim {claim} references unknown bank {bank}")]
    DanglingEndpoint { claim: String, bank: String },
    #[error("claim {0} is a self-loop")]
    SelfLoop(String),
    #[error("claim {0} has non-positive liability")]
    NonPositiveLiability(String),
    #[error("payment function of bank {bank} does not cover its outgoing claims: {detail}")]
    PaymentFunctionMismatch { bank: String, detail: String },
    #[error("payment table of bank {bank} violates monotone payment conditions: {detail}")]
    MonotonicityViolation { bank: String, detail: String },
    #[error("unknown bank: {0}")]
    UnknownBank(String),
    #[error("unknown claim: {0}")]
    UnknownClaim(String),
    #[error("funds {funds} out of range [0, {max}] for bank {bank}")]
    FundsOutOfRange {
        bank: String,
        funds: String,
        max: String,
    },
    #[error("wrong payment kind: {0}")]
    WrongPaymentKind(String),
    #[error("clearing iteration budget exhausted before tolerance reached ({0} rounds)")]
    NonConvergence(usize),
    #[error("trade return {return_paid} exceeds buyer external assets {available}")]
    Unaffordable {
        return_paid: String,
        available: String,
    },
    #[error("trade specification violation: {0}")]
    SpecViolation(String),
    #[error("linear program unexpectedly infeasible: {0}")]
    LpInfeasible(String),
    #[error("linear program dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("bad generator parameters: {0}")]
    BadParameters(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
