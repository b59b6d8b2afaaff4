use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the numerical routines.
///
/// Variant names double as the stable identifiers printed by the CLI.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("NoConvergence: {0}")]
    NoConvergence(String),
    #[error("NotRepelling: |mu| = {0} <= 1")]
    NotRepelling(f64),
    #[error("NotFixedPoint: residual {0:e}")]
    NotFixedPoint(f64),
    #[error("OutOfSafeRadius: |z - center| = {distance} > {radius}")]
    OutOfSafeRadius { distance: f64, radius: f64 },
    #[error("Degenerate: {0}")]
    Degenerate(String),
    #[error("NotInvertible: linear coefficient vanishes")]
    NotInvertible,
    #[error("ResonantAngle: |lambda^{n} - lambda| = {divisor:e}")]
    ResonantAngle { n: usize, divisor: f64 },
    #[error("Inconclusive: root-test radius {root_test} vs residual radius {residual}")]
    Inconclusive { root_test: f64, residual: f64 },
    #[error("OutOfDomain: {0}")]
    OutOfDomain(String),
    #[error("Overflow: value exceeds the representable range, use log_modulus_eval")]
    Overflow,
    #[error("BadParams: {0}")]
    BadParams(String),
    #[error("NoCertificate: set carries no density certificate")]
    NoCertificate,
    #[error("NotFound: {0}")]
    NotFound(String),
    #[error("ContinuationLost: {0}")]
    ContinuationLost(String),
    #[error("BudgetExceeded: {evaluations} evaluations")]
    BudgetExceeded { evaluations: u64 },
    #[error("InsufficientData: {0}")]
    InsufficientData(String),
    #[error("NoSignChange: {0}")]
    NoSignChange(String),
    #[error("CycleCollision: {0}")]
    CycleCollision(String),
}

impl Error {
    /// Short variant name, e.g. `"NotRepelling"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NoConvergence(_) => "NoConvergence",
            Error::NotRepelling(_) => "NotRepelling",
            Error::NotFixedPoint(_) => "NotFixedPoint",
            Error::OutOfSafeRadius { .. } => "OutOfSafeRadius",
            Error::Degenerate(_) => "Degenerate",
            Error::NotInvertible => "NotInvertible",
            Error::ResonantAngle { .. } => "ResonantAngle",
            Error::Inconclusive { .. } => "Inconclusive",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::Overflow => "Overflow",
            Error::BadParams(_) => "BadParams",
            Error::NoCertificate => "NoCertificate",
            Error::NotFound(_) => "NotFound",
            Error::ContinuationLost(_) => "ContinuationLost",
            Error::BudgetExceeded { .. } => "BudgetExceeded",
            Error::InsufficientData(_) => "InsufficientData",
            Error::NoSignChange(_) => "NoSignChange",
            Error::CycleCollision(_) => "CycleCollision",
        }
    }
}
