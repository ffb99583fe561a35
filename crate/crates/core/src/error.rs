use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("atom {index} lies within {distance:.3e} of the point 1 (floor {floor:.1e})")]
    AtomNearOne {
        index: usize,
        distance: f64,
        floor: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("evaluation point outside the domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge for {what}: last change {change:.3e} at {points} points")]
    Quadrature {
        what: String,
        change: f64,
        points: usize,
    },

    #[error("tolerance breach in {what}: {detail}")]
    Tolerance { what: String, detail: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario {scenario}: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Wraps an error with the name of the scenario that produced it.
    pub fn in_scenario(self, scenario: &str) -> Self {
        Error::Scenario {
            scenario: scenario.to_string(),
            source: Box::new(self),
        }
    }
}
