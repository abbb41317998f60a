use thiserror::Error;

/// Errors raised across the library. Each variant names the failing stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("no hole: eps*omega = {eps_omega:.6} <= 2/sqrt(pi); the Thomas-Fermi density is a disc")]
    NoHole { eps_omega: f64 },
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("solver error: {message} (last residuals: {residuals:?})")]
    Solver { message: String, residuals: Vec<f64> },
    #[error("search error: {0}")]
    Search(String),
    #[error("no ring: {0}")]
    NoRing(String),
    #[error("no vortices favorable: H(R*) = {0:.6e} >= 0")]
    NoVortices(f64),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("phase error: {0}")]
    Phase(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("stability error: {0}")]
    Stability(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config write error: {0}")]
    TomlWrite(#[from] toml::ser::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn solver_err(message: impl Into<String>, history: &[f64]) -> Error {
    let tail = history.len().saturating_sub(8);
    Error::Solver {
        message: message.into(),
        residuals: history[tail..].to_vec(),
    }
}
