use thiserror::Error;

/// Errors produced by the series, chart and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("truncation overflow: requested order ({requested}) exceeds representable ({max})")]
    TruncationOverflow { requested: usize, max: usize },

    #[error("singular series: vanishing linear part, not invertible")]
    SingularSeries,

    #[error("degeneracy: vanishing order in the space variable is {found}, expected {expected}")]
    Degeneracy { found: usize, expected: usize },

    #[error("inconsistent factorization: unit has zero constant term")]
    UnitInconsistency,

    #[error("family is not generic: |d Re a0 / d eps| = {margin:e} at 0")]
    NotGeneric { margin: f64 },

    #[error("misuse: {0}")]
    Misuse(String),

    #[error("input outside the domain of definition: {0}")]
    Domain(String),

    #[error("evaluation at a singular point of the time chart")]
    Pole,

    #[error("multiplier logarithm hit the branch cut (multiplier on the negative reals)")]
    BranchCut,

    #[error("infinite period: eps = 0 has no finite return period")]
    InfinitePeriod,

    #[error("newton iteration failed to converge: residual {residual:e} after {iterations} steps")]
    NewtonDiverged { residual: f64, iterations: usize },

    #[error("solver failed to converge: residual {residual:e} (target {target:e})")]
    Convergence { residual: f64, target: f64 },

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("translation-domain geometry failure: {0}")]
    Geometry(String),

    #[error("preparation inconsistency: worst residual {worst:e} exceeds tolerance {tol:e}")]
    PreparationInconsistency { worst: f64, tol: f64 },

    #[error("classification precondition violated: {0}")]
    Classification(String),

    #[error("moduli are not comparable: {0}")]
    Comparison(String),

    #[error("missing data: {0}")]
    Data(String),

    #[error("square-root criterion fails with residual {residual:e}; extraction refused")]
    Criterion { residual: f64 },

    #[error("trajectory escaped the chart domain at z = {z}")]
    Escape { z: num_complex::Complex64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
