use thiserror::Error;

use crate::grid::SpectralField;

pub type Result<T> = std::result::Result<T, ZkError>;

#[derive(Debug, Error)]
pub enum ZkError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("field carries relative mass {mass:.3e} on the singular set of `{name}`")]
    SingularSupport { name: String, mass: f64 },

    #[error("annulus certificate failed: relative mass {fraction:.3e} outside the support")]
    Certificate { fraction: f64 },

    #[error("p = 0 at xi = ({:.3e}, {:.3e}), eta = ({:.3e}, {:.3e})", xi[0], xi[1], eta[0], eta[1])]
    DegenerateDenominator { xi: [f64; 2], eta: [f64; 2] },

    #[error("symbol `{name}` is undefined at eta = ({:.3e}, {:.3e})", eta[0], eta[1])]
    AxisPoint { name: String, eta: [f64; 2] },

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("time {t} lies beyond the wrap-safe bound {t_safe}")]
    WrapAround { t: f64, t_safe: f64 },

    #[error("invalid time parameters: {0}")]
    InvalidTime(String),

    #[error("inadmissible data: {0}")]
    Inadmissible(String),

    #[error("numerical blow-up at t = {t}")]
    Blowup { t: f64, last_good: Box<SpectralField> },

    #[error("Picard iteration diverged, ratios {ratios:?}")]
    PicardDivergence { ratios: Vec<f64> },

    #[error("final data too large: X norm {x_norm:.4e} exceeds gate {epsilon:.4e}")]
    Gate { x_norm: f64, epsilon: f64 },

    #[error("sheared wavenumber ({:.4}, {:.4}) leaves the retained band of the target grid", k[0], k[1])]
    SpectralRange { k: [f64; 2] },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
