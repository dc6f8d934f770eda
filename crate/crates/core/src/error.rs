use thiserror::Error;

/// Errors raised by the core library.
///
/// Variants split into two families: malformed inputs (shapes, ranks, invalid
/// geometry) and violated numerical preconditions (eigenvalue collisions,
/// singular steps, non-invertible endpoints). [`Error::is_precondition`]
/// distinguishes them.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("fibre rank {0} is not even; the grading needs an even rank")]
    OddFiberRank(usize),

    #[error("fibre rank {0} is not supported for this slice kind")]
    UnsupportedRank(usize),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operator is not Hermitian: max |M - M^H| = {deviation:e}")]
    NonHermitian { deviation: f64 },

    #[error("{0}")]
    InvalidOperator(String),

    #[error("product margins do not hold: {0}")]
    MarginViolation(String),

    #[error("perturbation patch {0}")]
    InvalidPatch(String),

    #[error("incompatible gluing data: {0}")]
    IncompatibleGlue(String),

    #[error("operators are not cobordant: {0}")]
    NonCobordant(String),

    #[error("cut point {cut} collides with eigenvalue {eigenvalue} (nearest safe cut {suggestion})")]
    EigenvalueCollision {
        cut: f64,
        eigenvalue: f64,
        suggestion: f64,
    },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("singular time step at interval {interval}: |1 + h*lambda/2| is below tolerance")]
    SingularStep { interval: usize },

    #[error("ill-posed: {0}")]
    IllPosed(String),

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("operator is not invertible: {0}")]
    NotInvertible(String),

    #[error("essential support is not empty: {violating} violating sites")]
    NonEmptySupport { violating: usize },

    #[error("support is not contained in the truncated region: {0}")]
    SupportNotContained(String),

    #[error("cut lies in a region where the operator is not product: {0}")]
    NotProductAtCut(String),

    #[error("family is degenerate: eigenvalue pinned at zero on [{s0}, {s1}]")]
    PinnedZero { s0: f64, s1: f64 },

    #[error("family endpoint at s = {s} has a kernel of dimension {dim}")]
    EndpointKernel { s: f64, dim: usize },

    #[error("could not match eigenvalue branches near s = {s}")]
    BranchAmbiguity { s: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("problem too large for the dense route: {0}")]
    TooLarge(String),
}

impl Error {
    /// True for violated numerical preconditions, as opposed to malformed input.
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::EigenvalueCollision { .. }
                | Error::NoConvergence(_)
                | Error::Linalg(_)
                | Error::SingularStep { .. }
                | Error::IllPosed(_)
                | Error::ZeroDenominator(_)
                | Error::NotInvertible(_)
                | Error::NonEmptySupport { .. }
                | Error::SupportNotContained(_)
                | Error::NotProductAtCut(_)
                | Error::PinnedZero { .. }
                | Error::EndpointKernel { .. }
                | Error::BranchAmbiguity { .. }
                | Error::Quadrature(_)
                | Error::TooLarge(_)
                | Error::MarginViolation(_)
                | Error::NonCobordant(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
