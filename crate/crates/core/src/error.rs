use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point ({x}, {y}) is outside the field domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),

    #[error("newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("singular jacobian")]
    SingularJacobian,
    #[error("eigenvalue iteration stalled after {iterations} iterations")]
    EigenIterationStalled { iterations: usize },
    #[error("at least 3 grid spacings are required, got {0}")]
    InsufficientGrids(usize),
    #[error("the masked interior is empty")]
    DomainEmpty,

    #[error("finite-difference stencil leaves the domain")]
    StencilOutsideDomain,
    #[error("finite-difference estimate is noise dominated")]
    NoiseDominated,
    #[error("not a critical point: gradient norm {gradient_norm:e}")]
    NotACriticalPoint { gradient_norm: f64 },
    #[error("no nonvanishing mixed coefficient up to order {max_order}")]
    OrderExhausted { max_order: usize },
    #[error("no nonvanishing pure-x coefficient in orders {from}..={to}")]
    NoSuchL { from: usize, to: usize },
    #[error("jet order {have} is too small, {needed} required")]
    JetOrderTooSmall { needed: usize, have: usize },
    #[error("operation requires odd n, got {0}")]
    WrongParity(usize),

    #[error("gradient vanishes on the circle of radius {radius:e}")]
    GradientVanishesOnCircle { radius: f64 },
    #[error("winding number not certified with {samples} samples")]
    NotCertified { samples: usize },
    #[error("critical point does not look isolated")]
    NonIsolatedSuspected,
    #[error("gradient vanishes on the curve")]
    GradientVanishesOnCurve,

    #[error("radius {radius:e} leaves the domain")]
    RadiiOutsideDomain { radius: f64 },

    #[error("level {level} is outside the field range [{min}, {max}]")]
    LevelOutOfRange { level: f64, min: f64, max: f64 },
    #[error("gradient too small for curvature: {gradient_norm:e}")]
    GradientTooSmall { gradient_norm: f64 },
    #[error("gradient vanishes on the domain boundary")]
    BoundaryGradientVanishes,
    #[error("field has no sign structure on the probe circle")]
    NoSignStructure,

    #[error("the level set bounding the domain is not a closed curve")]
    LevelSetNotClosed,
    #[error("harmonic mix coefficients are both zero")]
    ZeroMix,
    #[error("unknown replication case '{0}'")]
    UnknownCase(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
