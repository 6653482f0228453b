use thiserror::Error;

/// Every failure mode of the toolkit.
///
/// Variants carry enough context for a batch run to log why a realization
/// or domain was excluded.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resolution N={n} cannot resolve the highest mode (need N >= {required})")]
    Resolution { n: usize, required: usize },

    #[error("degenerate critical point at ({x1:.6}, {x2:.6}): |det H| = {det:.3e}")]
    DegenerateCritical { x1: f64, x2: f64, det: f64 },

    #[error("Newton refinement did not converge after {iterations} iterations (|grad| = {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("critical set violates the torus Euler relation: {maxima} + {minima} - {saddles} != 0")]
    EulerViolation {
        maxima: usize,
        minima: usize,
        saddles: usize,
    },

    #[error("Neumann line escaped without capture after arc length {arc_length:.4}")]
    Escape { arc_length: f64 },

    #[error("domain assembly failed: {0}")]
    Assembly(String),

    #[error("ambiguous angle {angle:.4} rad at an extremum")]
    AmbiguousAngle { angle: f64 },

    #[error("asymptotic fit failed: {0}")]
    Fit(String),

    #[error("eigensolver failure: {0}")]
    SolverFailure(String),

    #[error("rearrangement input is negative (min = {min:.3e})")]
    NegativeInput { min: f64 },

    #[error("sector area {sector:.12e} does not match profile area {profile:.12e}")]
    AreaMismatch { sector: f64, profile: f64 },

    #[error("no circular arc encloses area {eta:.6e}")]
    NoArcFound { eta: f64 },

    #[error("nodal set matches none of the admissible shapes")]
    UnclassifiableShape,

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
