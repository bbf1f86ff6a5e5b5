use thiserror::Error;

/// Reasons a potential is rejected by [`crate::potential::Potential::new`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("the quartic coefficient a4 is absent or zero")]
    MissingQuartic,
    #[error("the quartic coefficient a4 must be negative")]
    WrongSignQuartic,
    #[error("V has no positive root below the search bound {bound}")]
    NoTurningPoint { bound: f64 },
    #[error("V is not positive on (0, Q+): violation near Q = {at}")]
    ShapeViolation { at: f64 },
    #[error("degree {0} is not an even power >= 4")]
    BadDegree(u32),
    #[error("could not parse potential: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Potential(#[from] PotentialError),

    #[error("quadrature error estimate {estimate:e} above tolerance {tol:e} after {subdivisions} subdivisions")]
    NonConvergence { tol: f64, estimate: f64, subdivisions: usize },
    #[error("integrand is not finite at {at}")]
    Domain { at: f64 },
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    #[error("order {order} needs {bytes} bytes of coefficients, budget is {budget}")]
    OrderOverflow { order: u32, bytes: usize, budget: usize },
    #[error("evaluation not stable to 40 bits at the {cap_bits}-bit precision cap")]
    PrecisionExhausted { cap_bits: u32 },
    #[error("the order-{order} polynomial vanishes at the sample point")]
    ZeroValue { order: u32 },
    #[error("the x^2 coefficient of order {order} is zero")]
    ZeroNormalizer { order: u32 },

    #[error("xi(tau) is not one-to-one near xi = {xi}")]
    NotMonotone { xi: f64 },
    #[error("{what} = {value} is outside the supported range")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("Q*lambda_dot/2 - lambda*P = {value} is not positive at xi = {xi}")]
    NegativeRadicand { xi: f64, value: f64 },

    #[error("no branch assignment gives a minimum of B(mu)")]
    NoSaddle,
    #[error("eta/sqrt(kappa) = {ratio} is within 1e-6 of the region boundary")]
    BoundaryRegion { ratio: f64 },
    #[error("tau integral diverges: convergence exponents ({left}, {right}) must both be positive")]
    Divergent { left: i64, right: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
