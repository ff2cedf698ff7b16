use thiserror::Error;

/// Errors surfaced by the estimation and data-preparation layers.
#[derive(Debug, Error)]
pub enum EngineError {
    #[error("variable `{0}` not found in panel")]
    UnknownVariable(String),

    #[error("variable `{name}` has zero variance in scope `{scope}`")]
    ZeroVariance { name: String, scope: String },

    #[error("duplicate observation for entity `{entity}` in year {year}")]
    DuplicateObservation { entity: String, year: i32 },

    #[error("observation year {year} outside declared window {lo}..={hi}")]
    YearOutsideWindow { year: i32, lo: i32, hi: i32 },

    #[error("unknown education category `{0}`")]
    UnknownEducation(String),

    #[error("unknown assessment level `{0}`")]
    UnknownLevel(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("design matrix is rank deficient; dependent columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("within transform did not converge after {sweeps} sweeps (last delta {delta:e})")]
    NoConvergence { sweeps: usize, delta: f64 },

    #[error("need at least {needed} clusters, found {found}")]
    TooFewClusters { needed: usize, found: usize },

    #[error("coefficient `{0}` not present in fit")]
    UnknownCoefficient(String),

    #[error("joint-test subcovariance is singular")]
    SingularSubcovariance,

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("no observations for year {0}")]
    EmptyYear(i32),

    #[error("numerical failure: {0}")]
    Numerical(String),
}
