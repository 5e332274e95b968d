use thiserror::Error;

/// Errors raised by the geometry, field, frequency and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point s = {s} lies within {band:e} of a crease of the graph")]
    NonSmoothPoint { s: f64, band: f64 },

    #[error("adaptive refinement exceeded {limit} subdivisions (estimated error {error:e})")]
    MaxRefinementExceeded { limit: usize, error: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no Whitney cube covers the projection of the ball; translate the lattice")]
    NoRootFound,

    #[error("{unresolved} leaf cells still touch the boundary at the deepest generation")]
    WindowTouchesBoundary { unresolved: usize },

    #[error("decomposition too shallow: need generation {needed}, built to {built}")]
    DepthExceeded { needed: u32, built: u32 },

    #[error("unknown catalog field `{0}`")]
    UnknownName(String),

    #[error("fit residual {residual:e} above tolerance {tolerance:e}")]
    FitDiverged { residual: f64, tolerance: f64 },

    #[error("least-squares system ill-conditioned beyond the ridge ladder")]
    IllConditioned,

    #[error("nontangential estimates did not settle: last change {change:e} > {tolerance:e}")]
    NoConvergence { change: f64, tolerance: f64 },

    #[error("energy cross-check failed: volume {volume:e} vs surface {surface:e}")]
    CrossCheckFailed { volume: f64, surface: f64 },

    #[error("spherical average h = {h:e} is not positive; frequency undefined")]
    ZeroAverage { h: f64 },

    #[error("interval [{r_lo}, {r_hi}] not certified admissible")]
    NotAdmissible { r_lo: f64, r_hi: f64 },

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("degenerate family: {0}")]
    DegenerateFamily(String),

    #[error("ball B(x', {radius}) leaves the harmonicity region")]
    NotHarmonicRegion { radius: f64 },

    #[error("denominator integral {value:e} below floor")]
    ZeroDenominator { value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
