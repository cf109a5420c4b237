use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid too small or too coarse for the requested field.
    #[error("sampling: {reason}; need at least N = {required_n}")]
    Sampling { reason: String, required_n: usize },

    /// A feature (wire, aperture) is narrower than the grid can resolve.
    #[error("resolution: {0}")]
    Resolution(String),

    #[error("aliasing risk: distance {distance_m} m exceeds the band-limited range of this grid (max safe distance {max_safe_m} m)")]
    AliasingRisk { distance_m: f64, max_safe_m: f64 },

    #[error("cost: {0}")]
    Cost(String),

    #[error("sample coordinate ({x_m}, {y_m}) m lies outside the {half_width_m} m half-window")]
    OutOfWindow {
        x_m: f64,
        y_m: f64,
        half_width_m: f64,
    },

    #[error("element {index}: {source}")]
    Element {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("infeasible telescope: {reason}{}", closest.as_ref().map(|c| format!("; closest candidate: {c}")).unwrap_or_default())]
    Infeasible {
        reason: String,
        closest: Option<String>,
    },

    #[error("signal and idler trains differ; asymmetric twin-side optics are not supported")]
    UnsupportedAsymmetry,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("validation error at `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for configuration problems (bad documents, bad arguments), as
    /// opposed to physics or feasibility failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Schema { .. }
            | Error::Validation { .. }
            | Error::Parse(_)
            | Error::InvalidArgument(_) => true,
            Error::Element { source, .. } | Error::Scenario { source, .. } => {
                source.is_validation()
            }
            _ => false,
        }
    }

    /// Innermost error, skipping element/scenario annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::Element { source, .. } | Error::Scenario { source, .. } => source.root(),
            e => e,
        }
    }
}
