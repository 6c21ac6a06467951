use thiserror::Error;

/// Errors produced by the geometry, assembly and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("unknown canonical geometry '{0}' (expected lshape, zshape or square)")]
    UnknownGeometry(String),

    #[error("polygon diameter {0} violates the scaling proviso diam < 1")]
    DiameterTooLarge(f64),

    #[error("singular evaluation point: {0}")]
    SingularPoint(String),

    #[error("empty boundary region selection")]
    EmptyRegion,

    #[error("matrix is not positive definite: pivot {pivot} is {value}")]
    NotSpd { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("adaptive quadrature did not converge within the subdivision budget (estimate {estimate}, requested tol {tol})")]
    QuadratureBudget { estimate: f64, tol: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("EOC fit needs positive error values, got {0}")]
    NonPositiveError(f64),

    #[error("experiment failed at level {level} during {stage}: {source}")]
    Experiment {
        level: usize,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
