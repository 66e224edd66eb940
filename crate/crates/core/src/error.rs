use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// T, mu, sigma or rho outside their structural ranges.
    #[error("invalid moment data: {0}")]
    Structural(String),

    /// No nonnegative distribution has these moments.
    #[error("ambiguity set is empty: mu^2 + rho*sigma^2 = {0:e} < 0")]
    Infeasible(f64),

    /// Feasible, but only on the boundary of the moment cone.
    #[error("moment data is on the boundary mu^2 + rho*sigma^2 = 0; a strictly feasible set is required")]
    NotStrict,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero polynomial has no isolated roots")]
    ZeroPolynomial,

    #[error("empty domain [{0}, {1}]")]
    EmptyDomain(f64, f64),

    #[error("linear program {0}")]
    Lp(String),

    #[error("cutting-plane solver: {0}")]
    Sip(String),

    #[error("no feasible distribution on the primal grid")]
    GridInfeasible,
}
