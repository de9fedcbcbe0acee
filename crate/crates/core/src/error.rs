use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("bulk velocity too large for the velocity box at cell {cell}: |u| = {speed:.3e} > {limit:.3e}")]
    TruncationRisk { cell: usize, speed: f64, limit: f64 },
    #[error("support mismatch: f > 0 where the reference density vanishes (cell {0})")]
    SupportMismatch(usize),
    #[error("mass mismatch: {a:.12e} vs {b:.12e}")]
    MassMismatch { a: f64, b: f64 },
    #[error("vacuum: density below floor at cell {0}")]
    Vacuum(usize),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(&'static str),
    #[error("invalid measure: {0}")]
    Measure(String),
    #[error("instance too large for the dense oracle: {nodes} nodes (limit {limit})")]
    OracleSize { nodes: usize, limit: usize },
    #[error("linear program failed: {0}")]
    Lp(String),
    #[error("CFL violation: dt = {dt:.3e} exceeds limit {limit:.3e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("positivity loss: clipped mass {clipped:.3e} exceeds {limit:.1e} at t = {t:.6}")]
    Positivity { clipped: f64, limit: f64, t: f64 },
    #[error("energy inequality violated at t = {t:.6}: excess {excess:.3e} > {tol:.1e}")]
    EnergyViolation { t: f64, excess: f64, tol: f64 },
    #[error("maximum principle violated: {0}")]
    MaximumPrinciple(String),
    #[error("fit refused: {0}")]
    Fit(String),
    #[error("trajectory: {0}")]
    Trajectory(String),
    #[error("container format: {0}")]
    Format(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::Positivity { .. }
                | Error::EnergyViolation { .. }
                | Error::MaximumPrinciple(_)
                | Error::Cfl { .. }
                | Error::TruncationRisk { .. }
                | Error::Vacuum(_)
                | Error::Lp(_)
        )
    }
}
