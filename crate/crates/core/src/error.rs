use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeckeError {
    #[error("singular matrix")]
    SingularMatrix,
    #[error("denominator {0} is not a power of p")]
    BadDenominator(String),
    #[error("determinant {0} is not a signed power of p")]
    NotInGroup(String),
    #[error("element has no positive-determinant representative")]
    NegativeDeterminant,
    #[error("fundamental-domain reduction did not converge after {0} steps")]
    NonConvergence(usize),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid weight {0}: need an even integer >= 4")]
    InvalidWeight(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("quadrature failed to reach tolerance: {0}")]
    QuadratureFailure(String),
    #[error("element is not hyperbolic")]
    NonHyperbolic,
    #[error("hyperbolic element has irrational fixed points")]
    NotSplit,
    #[error("stabilizer of the element in the modular group is nontrivial")]
    NontrivialStabilizer,
    #[error("ill-conditioned dictionary (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, HeckeError>;
