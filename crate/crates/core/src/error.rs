use thiserror::Error;

/// Errors raised by the simulation engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("wave function has (near-)zero norm and cannot be normalized")]
    ZeroNorm,

    #[error("non-finite amplitudes detected during {context}")]
    NonFinite { context: String },

    #[error("time step {dt} exceeds the accuracy bound {bound} for this grid and Hamiltonian")]
    TimeStepTooLarge { dt: f64, bound: f64 },

    #[error("velocity evaluation too close to a wave-function node at t = {time}")]
    NodeProximity { time: f64 },

    #[error("configuration outside the grid extent: {0}")]
    OutOfDomain(String),

    #[error("collapse center has vanishing likelihood (post-hit norm {norm:.3e})")]
    ImpossibleCenter { norm: f64 },

    #[error("scenario document is invalid:\n{}", issues.join("\n"))]
    ScenarioInvalid { issues: Vec<String> },

    #[error("scenario parse error: {0}")]
    ScenarioParse(String),

    #[error("statistics: {0}")]
    Stats(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
