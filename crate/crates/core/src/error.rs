use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("line {line}: malformed entry `{text}` (key `{key}`)")]
    Malformed { line: usize, key: String, text: String },

    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { line: usize, key: String },

    #[error("unknown unit `{unit}` for `{key}`")]
    UnknownUnit { key: String, unit: String },

    #[error("{what} outside its domain: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("{what} did not converge: achieved error {achieved:e}, target {target:e}")]
    Numeric {
        what: &'static str,
        achieved: f64,
        target: f64,
    },

    #[error("no equilibrium in window [{lo:e}, {hi:e}] m")]
    NoEquilibrium { lo: f64, hi: f64 },

    #[error("integration unstable at t = {t} s (energy {energy:e} J)")]
    Unstable { t: f64, energy: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            what,
            detail: detail.into(),
        }
    }
}

pub(crate) fn ensure_positive(key: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(
            key,
            format!("must be positive and finite, got {value}"),
        ))
    }
}
