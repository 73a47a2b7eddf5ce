use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("degenerate metric at {x:?}: smallest eigenvalue {min_eig:e}")]
    DegenerateMetric { x: Vec<f64>, min_eig: f64 },
    #[error("point maps to the north pole (X_{{d+1}} = 1)")]
    PoleSingularity,
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("glued metric not positive definite: eigenvalue {min_eig:e} at {at:?}")]
    GluingInvalid { min_eig: f64, at: Vec<f64> },
    #[error("flow integration failed at t = {t}: {reason}")]
    Integration { t: f64, state: Vec<f64>, reason: String },
    #[error("quadrature did not converge: error {achieved:e} with {panels} panels")]
    Quadrature { achieved: f64, panels: usize },
    #[error("collision direction is not a unit vector (|ω| = {0})")]
    NonUnit(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("smallness violated: contraction ratio {ratio:.3e}")]
    SmallnessViolated { ratio: f64 },
    #[error("monotone sandwich broken at iteration {iteration}: excess {excess:e}")]
    MonotonicityBroken { iteration: usize, excess: f64 },
    #[error("operator is not Hermitian (deviation {0:e})")]
    NonHermitian(f64),
    #[error("symbol reaches the lattice boundary with magnitude {0:e}")]
    BoundaryMass(f64),
    #[error("empty grid")]
    EmptyGrid,
    #[error("sampler failure: {0}")]
    Sampler(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
