use crate::C64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter sits on a value where the requested map is undefined
    /// (`zeta = 0`, `beta = 1`, `h = 0`).
    #[error("degenerate parameter: {0}")]
    DegenerateParameter(&'static str),

    /// One or more modulus bounds of a parameter set are violated.
    #[error("parameter bounds violated: {}", .0.join(", "))]
    ParameterBounds(Vec<String>),

    #[error("divergent nome: Im tau = {0} is not positive")]
    DivergentNome(f64),

    #[error("divergent product: |{name}| = {modulus} is not below 1")]
    DivergentProduct { name: &'static str, modulus: f64 },

    /// An adaptive sum or product needed more terms than the policy allows.
    #[error("truncation cap of {cap} terms exceeded in {what}")]
    TruncationFailure { what: &'static str, cap: usize },

    /// A denominator is too close to one of its zeros to be trusted.
    #[error("near pole of {factor} at {at}")]
    NearPole { factor: String, at: C64 },

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    #[error("ill-conditioned matrix: condition estimate {cond:e} exceeds {limit:e}")]
    IllConditioned { cond: f64, limit: f64 },

    #[error("unsupported rank N = {rank}: {reason}")]
    UnsupportedRank { rank: usize, reason: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("extrapolation did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Refusals mark points where an identity cannot be tested in double
    /// precision (poles, singular or ill-conditioned inverses, parameters
    /// outside the convergence region, rank guards). They are reported apart
    /// from failures.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::NearPole { .. }
                | Error::SingularMatrix(_)
                | Error::IllConditioned { .. }
                | Error::ParameterBounds(_)
                | Error::UnsupportedRank { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
