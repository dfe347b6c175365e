use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("fields live on different grids ({left} vs {right})")]
    GridMismatch { left: String, right: String },

    #[error("exponent {value} outside the admissible range {range}")]
    ExponentOutOfRange { value: f64, range: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("time series covers [{start}, {end}] but [{want_start}, {want_end}] was requested")]
    Coverage {
        start: f64,
        end: f64,
        want_start: f64,
        want_end: f64,
    },

    #[error("normalized defect undefined: E1 * |u|_inf vanishes but the numerator is {0}")]
    DegenerateDefect(f64),

    #[error("numerical sentinel at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("malformed field data: {0}")]
    MalformedData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
