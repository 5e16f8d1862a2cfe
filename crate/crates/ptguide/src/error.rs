use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("validation error: {field}: {message}")]
    Validation { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("quadrature failed to converge within {0} refinements")]
    QuadratureNonConvergence(usize),

    #[error("velocity profile positivity violated at t = {t}: V_d = {value}")]
    ProfilePositivity { t: f64, value: f64 },

    #[error("propagation aborted at t = {t}: {message}")]
    Propagation { t: f64, message: String },
}

impl Error {
    pub fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
