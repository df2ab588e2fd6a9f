use thiserror::Error;

/// Errors raised by the design library.
///
/// Variant names double as the machine-readable error kind reported by the CLI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("measure is not symmetric about 0")]
    AsymmetricInput,
    #[error("need moments up to index {needed}, have up to {available}")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("moment prefix of length {index} lies on the boundary of the moment space")]
    BoundaryMomentPoint { index: usize },
    #[error("invalid moment sequence: {0}")]
    InvalidMomentSequence(String),
    #[error("invalid canonical sequence: {0}")]
    InvalidCanonical(String),
    #[error("invalid zeta sequence at index {index}")]
    InvalidZeta { index: usize },
    #[error("need canonical depth {needed}, have {available}")]
    InsufficientDepth { needed: usize, available: usize },
    #[error("degenerate recurrence step at stage size {stage}, index {index}")]
    DegenerateStep { stage: usize, index: usize },
    #[error("zero denominator: {0}")]
    ZeroDenominator(String),
    #[error("information matrix is singular")]
    SingularInformationMatrix,
    #[error("no feasible point found")]
    NoFeasiblePoint,
    #[error("canonical sequence does not terminate")]
    NonTerminatingSequence,
    #[error("no design satisfies the bias budget")]
    InfeasibleBudget,
    #[error("non-finite power: gamma = {0} on the cubature grid")]
    NonfinitePower(f64),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

impl DesignError {
    /// Short variant name, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            DesignError::InvalidMeasure(_) => "InvalidMeasure",
            DesignError::AsymmetricInput => "AsymmetricInput",
            DesignError::InsufficientMoments { .. } => "InsufficientMoments",
            DesignError::BoundaryMomentPoint { .. } => "BoundaryMomentPoint",
            DesignError::InvalidMomentSequence(_) => "InvalidMomentSequence",
            DesignError::InvalidCanonical(_) => "InvalidCanonical",
            DesignError::InvalidZeta { .. } => "InvalidZeta",
            DesignError::InsufficientDepth { .. } => "InsufficientDepth",
            DesignError::DegenerateStep { .. } => "DegenerateStep",
            DesignError::ZeroDenominator(_) => "ZeroDenominator",
            DesignError::SingularInformationMatrix => "SingularInformationMatrix",
            DesignError::NoFeasiblePoint => "NoFeasiblePoint",
            DesignError::NonTerminatingSequence => "NonTerminatingSequence",
            DesignError::InfeasibleBudget => "InfeasibleBudget",
            DesignError::NonfinitePower(_) => "NonfinitePower",
            DesignError::InvalidSpec(_) => "InvalidSpec",
        }
    }

    /// True for errors caused by malformed input rather than by the numerics.
    pub fn is_invalid_input(&self) -> bool {
        matches!(
            self,
            DesignError::InvalidMeasure(_)
                | DesignError::AsymmetricInput
                | DesignError::InsufficientMoments { .. }
                | DesignError::InvalidMomentSequence(_)
                | DesignError::InvalidCanonical(_)
                | DesignError::InvalidZeta { .. }
                | DesignError::InsufficientDepth { .. }
                | DesignError::InvalidSpec(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, DesignError>;
