use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("qubit amplitudes not normalized: |alpha|^2 + |beta|^2 = {norm_sqr}")]
    Normalization { norm_sqr: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("protocol exhausted: no amplitude left to measure")]
    ProtocolExhausted,

    #[error("schedule exhausted at cumulative success {reached} below target {target}")]
    ScheduleExhausted { reached: f64, target: f64 },

    #[error("fidelity {target} unreachable: dark-state ceiling is {ceiling}")]
    Unreachable { target: f64, ceiling: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("closed form unsupported: {0}")]
    UnsupportedClosedForm(String),

    #[error("missing column '{missing}'; available: {available}")]
    MissingColumn { missing: String, available: String },
}

impl Error {
    /// Short stable tag used in machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InvalidTopology(_) => "invalid-topology",
            Error::Normalization { .. } => "normalization",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::StepSize(_) => "step-size",
            Error::Numerical(_) => "numerical",
            Error::ProtocolExhausted => "protocol-exhausted",
            Error::ScheduleExhausted { .. } => "schedule-exhausted",
            Error::Unreachable { .. } => "unreachable-fidelity",
            Error::Capacity(_) => "capacity",
            Error::Calibration(_) => "calibration",
            Error::Fit(_) => "fit",
            Error::UnsupportedClosedForm(_) => "unsupported-closed-form",
            Error::MissingColumn { .. } => "missing-column",
        }
    }
}
