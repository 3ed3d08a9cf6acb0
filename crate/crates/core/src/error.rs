use alloc::string::String;
use core::fmt;

/// Errors reported by the toolkit.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A weight vector has the wrong length or a non-positive / non-finite entry.
    InvalidWeights(String),
    /// A probability vector is not a point of the open simplex.
    InvalidSimplexPoint(String),
    /// A site, path or domain is malformed.
    InvalidGeometry(String),
    /// A numeric parameter (killing rate, horizon, sample count) is out of range.
    InvalidParameter(String),
    /// `E[1/x_i]` is infinite because `alpha_i <= 1`.
    Divergent { direction: usize, alpha: f64 },
    /// The normalizer `sum(alpha) - 1` has the wrong sign or vanishes.
    DegenerateNormalizer { total: f64 },
    /// Operation only defined in another dimension.
    WrongDimension { expected: usize, found: usize },
    /// Operation only defined in the ballistic regime.
    WrongRegime(String),
    /// Dense solve hit a (numerically) singular pivot.
    SingularSystem,
    /// Lemma-style stencil `x3` is not a neighbour of `x2`, or a site is not interior.
    BadStencil(String),
    /// A Green value or quadrature does not converge (`k_m >= 1`).
    NonConvergent(String),
    /// No weight exceeds one, so the integrability bound is unavailable.
    HypothesisFailed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidWeights(msg) => write!(f, "invalid weights: {msg}"),
            Error::InvalidSimplexPoint(msg) => write!(f, "invalid simplex point: {msg}"),
            Error::InvalidGeometry(msg) => write!(f, "invalid geometry: {msg}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Divergent { direction, alpha } => write!(
                f,
                "E[1/x_{direction}] diverges (alpha = {alpha} <= 1)"
            ),
            Error::DegenerateNormalizer { total } => {
                write!(f, "degenerate normalizer: sum(alpha) = {total}")
            }
            Error::WrongDimension { expected, found } => {
                write!(f, "wrong dimension: expected d = {expected}, found d = {found}")
            }
            Error::WrongRegime(msg) => write!(f, "wrong regime: {msg}"),
            Error::SingularSystem => f.write_str("singular linear system"),
            Error::BadStencil(msg) => write!(f, "bad stencil: {msg}"),
            Error::NonConvergent(msg) => write!(f, "not convergent: {msg}"),
            Error::HypothesisFailed(msg) => write!(f, "hypothesis failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
