use thiserror::Error;

use crate::expr::ParseError;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SrmError {
    /// Point lies outside the single coordinate chart of the model.
    #[error("point outside chart: {0}")]
    OutsideChart(String),
    /// Finite-difference step collapsed below representable precision.
    #[error("finite-difference step underflow at scale {0:e}")]
    StepUnderflow(f64),
    /// Frame fields are linearly dependent at a point.
    #[error("frame is degenerate at the given point (|det| = {0:e})")]
    DegenerateFrame(f64),
    /// Supplied frame is not orthonormal.
    #[error("frame is not orthonormal (Gram residual {0:e})")]
    NonOrthonormalFrame(f64),
    /// The horizontal normal vanishes (|N0| below threshold).
    #[error("characteristic point (|N0| = {0:e})")]
    CharacteristicPoint(f64),
    /// Point is not on the hypersurface.
    #[error("point is not on the surface (defect {0:e})")]
    NotOnSurface(f64),
    /// Defining function has vanishing gradient.
    #[error("degenerate defining function (|grad| = {0:e})")]
    DegenerateSurface(f64),
    /// Operation needs a parametrized surface with a bounded box.
    #[error("surface has no bounded parameter domain")]
    UnboundedDomain,
    /// Operation requires a vertically rigid ambient model.
    #[error("manifold is not vertically rigid (residual {0:e})")]
    NonRigid(f64),
    /// Dilation data absent.
    #[error("manifold carries no dilation data")]
    NoDilation,
    /// Mean curvature fails to be constant on the samples.
    #[error("surface is not CMC: max |div nu - c| = {0:e}")]
    NotCmc(f64),
    /// Neither minimality nor the volume constraint holds for a second variation.
    #[error("second variation needs H = 0 or a volume-preserving variation (max|H| = {h:e}, constraint residual = {residual:e})")]
    VariationPrecondition { h: f64, residual: f64 },
    /// Variation support reaches the boundary or the characteristic locus.
    #[error("variation support invalid: {0}")]
    BadSupport(String),
    /// Numerical method failed to converge or produced inconsistent results.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Bad user input (parameters out of range, malformed definitions).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Expression syntax error.
    #[error("parse error at {0}")]
    Parse(ParseError),
}

impl From<ParseError> for SrmError {
    fn from(e: ParseError) -> Self {
        SrmError::Parse(e)
    }
}

pub type Result<T> = std::result::Result<T, SrmError>;
