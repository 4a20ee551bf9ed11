use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("input file not found: {0}")]
    MissingFile(PathBuf),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("duplicate observation key (entity={entity}, period={period})")]
    DuplicateKey { entity: String, period: i32 },

    #[error("no valid rows after filtering ({rejected} rejected)")]
    NoValidRows { rejected: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid bin edges: {0}")]
    InvalidEdges(String),

    #[error("periods must satisfy p1 < p2, got p1={p1}, p2={p2}")]
    BadPeriodOrder { p1: i32, p2: i32 },

    #[error("no entity present with positive value in both periods")]
    EmptyIntersection,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("log-density is not concave in the fit window (quadratic coefficient {coeff:.3e})")]
    NonConcave { coeff: f64 },

    #[error("growth-rate data is one-sided: {n_pos} positive-r bins, {n_neg} negative-r bins")]
    OneSidedGrowth { n_pos: usize, n_neg: usize },

    #[error("degenerate growth-rate data: all mass at r = 0")]
    DegenerateGrowth,

    #[error("kernel not normalizable: {0}")]
    NonNormalizableKernel(String),

    #[error("theta = 1 with log10_a = {log10_a} is inconsistent with the symmetry-axis relation")]
    GammaInconsistent { log10_a: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("grid too coarse for finite differences: {0}")]
    GridTooCoarse(String),

    #[error("degenerate regression input: {0}")]
    DegenerateRegression(String),

    #[error("pipeline stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
