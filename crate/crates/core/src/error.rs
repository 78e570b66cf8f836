use thiserror::Error;

/// Errors produced by the geometry and dynamics layers.
#[derive(Debug, Error)]
pub enum TubeError {
    #[error("degenerate metric at point {point:?}")]
    DegenerateMetric { point: [f64; 3] },

    #[error("degenerate plane: |u|^2|v|^2 - <u,v>^2 = {gram_det:.3e}")]
    DegeneratePlane { gram_det: f64 },

    #[error("irregular curve: |velocity| = {speed:.3e} at t = {t}")]
    IrregularCurve { t: f64, speed: f64 },

    #[error("vanishing geodesic curvature: k1 = {k1:.3e} at s = {s} (minimum {k1_min:.1e})")]
    VanishingCurvature { s: f64, k1: f64, k1_min: f64 },

    #[error("tube degenerate: EG - F^2 = {det:.3e} at (s, psi) = ({s}, {psi})")]
    TubeDegenerate { s: f64, psi: f64, det: f64 },

    #[error("profile not simple: {reason}")]
    ProfileNotSimple { reason: String },

    #[error("left chart domain at {point:?}")]
    LeftChartDomain { point: [f64; 3] },

    #[error("step failure: {reason}")]
    StepFailure { reason: String },

    #[error("left domain at (s, psi) = ({s}, {psi})")]
    LeftDomain { s: f64, psi: f64 },

    #[error("seed infeasible: no real p_s > 0 at H = 1/2 for (psi0, p_psi0) = ({psi0}, {p_psi0})")]
    SeedInfeasible { psi0: f64, p_psi0: f64 },

    #[error("insufficient points: got {got}, need at least {need}")]
    InsufficientPoints { got: usize, need: usize },

    #[error("pole singularity: |1 - x4| = {gap:.3e}")]
    PoleSingularity { gap: f64 },

    #[error("expression error: {0}")]
    Expr(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TubeError>;

impl TubeError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        TubeError::Io { path: path.into(), source }
    }

    /// Process exit code convention: config errors are 2, numerical failures 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            TubeError::Config(_) | TubeError::Expr(_) => 2,
            _ => 3,
        }
    }
}
