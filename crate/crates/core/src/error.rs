//! Error type shared by every module of the crate.

use thiserror::Error;

/// Everything that can go wrong while validating inputs or running the
/// numeric kernels. Variants carry enough context to point at the offending
/// entry, minor, or sample.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A matrix that must be symmetric is not, first detected at `(i, j)`.
    #[error("matrix not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },

    /// An even lattice needs even diagonal Gram entries; `index` is the
    /// offending diagonal position.
    #[error("gram diagonal entry {index} is odd; lattice is not even")]
    NotEven { index: usize },

    /// A leading principal minor of the Gram matrix is non-positive.
    #[error("gram matrix not positive definite: leading minor {minor} of order {order} is non-positive")]
    NotPositiveDefinite { order: usize, minor: i128 },

    /// Enumeration cutoff below zero.
    #[error("enumeration cutoff must be nonnegative, got {cutoff}")]
    NegativeCutoff { cutoff: String },

    /// A q-series was requested with a cutoff below its leading exponent.
    #[error("series cutoff {cutoff} too small; must exceed {minimum}")]
    CutoffTooSmall { cutoff: String, minimum: String },

    /// Series inversion requires a nonzero leading coefficient.
    #[error("cannot invert series: leading coefficient is zero (or series is empty)")]
    NonInvertibleLeadingTerm,

    /// A point that must lie in the upper half-plane does not.
    #[error("point {value} is not in the upper half-plane")]
    NotInUpperHalfPlane { value: String },

    /// The imaginary part of a would-be Siegel point is not positive definite.
    #[error("imaginary part not positive definite (smallest eigenvalue {eigenvalue:e})")]
    ImagPartNotPositiveDefinite { eigenvalue: f64 },

    /// A characteristic-polynomial root left the upper half-plane, which the
    /// positivity of Im(A) forbids; signals bad input or a numeric failure.
    #[error("eigenvalue {value} outside the upper half-plane")]
    EigenvalueOutsideH { value: String },

    /// An iterative solver failed to reach its residual target.
    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// The theta tail bound needs more vectors than the configured budget.
    #[error("tolerance unachievable: enumeration needs ~{needed} vectors, budget is {budget}")]
    TolUnachievable { needed: u64, budget: u64 },

    /// The character sample matrix is numerically singular on every ladder.
    #[error("sample system ill-conditioned (estimate {estimate:e}); characters may coincide")]
    IllConditionedSamples { estimate: f64 },

    /// The solved linear system does not reproduce its right-hand side.
    #[error("solved system inconsistent: residual {residual:e} exceeds {tolerance:e}")]
    InconsistentSystem { residual: f64, tolerance: f64 },

    /// Closed-form S-matrix disagrees with the numeric solver.
    #[error("closed-form S-matrix disagrees with numeric solver: max deviation {deviation:e}")]
    ValidationMismatch { deviation: f64 },

    /// An orthogonal projection of a glue vector missed the dual lattice.
    #[error("projection of transversal vector onto part {part} is not in its dual lattice")]
    ProjectionNotInDual { part: usize },

    /// The supplied integer matrix is not in SL2(Z).
    #[error("matrix is not in SL2(Z): determinant {det}")]
    NotInSL2Z { det: i64 },

    /// det(-iA) lies too close to the branch cut of the principal logarithm.
    #[error("branch ambiguity: arg det(-iA) = {arg} within 1e-6 of the cut")]
    BranchAmbiguity { arg: f64 },

    /// Structured-input parse failure with position information.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Semantic problem in otherwise well-formed input.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Filesystem-level failure (message keeps the path).
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
