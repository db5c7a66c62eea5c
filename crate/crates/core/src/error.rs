use thiserror::Error;

/// Every failure the library reports. Variants name the precondition that was violated.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bad dimension: {0}")]
    BadDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state is not normalized: norm² = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("matrix is not Hermitian: max |M - M†| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("trace is {trace}, expected 1")]
    BadTrace { trace: f64 },
    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("non-finite entry in input")]
    NonFinite,
    #[error("state has no bipartite structure")]
    NoBipartiteStructure,
    #[error("tolerance `{0}` must be positive and finite")]
    BadTolerance(&'static str),

    #[error("post-selection is an eigenstate of the observable (spread {spread:e}); orthogonal partner undefined")]
    EigenstatePostSelection { spread: f64 },
    #[error("states are not orthogonal: |<a|b>| = {overlap:e}")]
    NotOrthogonal { overlap: f64 },

    #[error("post-selection is orthogonal to the pre-selection: |<phi|psi>|² = {probability:e}")]
    OrthogonalPostSelection { probability: f64 },
    #[error("post-selection probability vanishes: <phi|rho|phi> = {probability:e}")]
    ZeroPostSelectionProbability { probability: f64 },
    #[error("intermediate post-selection {level} of the orthogonal chain is orthogonal to the pre-selection")]
    OrthogonalIntermediatePostSelection { level: usize },
    #[error("moment order must be at least 1")]
    BadMomentOrder,

    #[error("observable has degenerate eigenvalues (min gap {gap:e})")]
    DegenerateObservable { gap: f64 },
    #[error("design matrix is singular: |det| = {det_abs:e}")]
    SingularDesign { det_abs: f64 },
    #[error("every basis post-selection failed ({tried} tried); last error: {last}")]
    AllPostSelectionsFailed { tried: usize, last: String },
    #[error("operator set is invalid: {0}")]
    BadOperatorSet(String),

    #[error("witness setting has zero-norm primed state on side {side}")]
    ZeroNormPhiPrime { side: char },
    #[error("no violation anywhere on the grid")]
    NoViolationOnGrid,
    #[error("bad parameters: {0}")]
    BadParams(String),
    #[error("spin must be a positive half-integer, got {0}")]
    BadSpin(f64),
    #[error("unknown witness variant `{0}`")]
    BadVariant(String),

    #[error("pre-selection is rank deficient (minimum eigenvalue {min_eigenvalue:e}); perturbation bound is vacuous")]
    RankDeficientPreSelection { min_eigenvalue: f64 },

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;
