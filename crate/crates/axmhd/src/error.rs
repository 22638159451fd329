use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("field violates decay precondition: {0}")]
    Decay(String),
    #[error("block index {index} exceeds j_max = {jmax}")]
    BlockIndex { index: i32, jmax: i32 },
    #[error("insufficient dealiasing margin: {0}")]
    Dealias(String),
    #[error("velocity not divergence-free: relative residual {0:e}")]
    Divergence(f64),
    #[error("zero block: {0}")]
    ZeroBlock(String),
    #[error("CFL violation: Courant number {courant:.4} exceeds safety {safety}; reduce dt below {suggested_dt:e}")]
    Cfl { courant: f64, safety: f64, suggested_dt: f64 },
    #[error("blow-up at t = {t}: {report}")]
    BlowUp { t: f64, report: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("structural violation: {0}")]
    Structural(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
