use std::path::PathBuf;

use thiserror::Error;

/// Which realizability functional failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Functional {
    Density,
    Pressure,
    Kurtosis,
}

impl std::fmt::Display for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Functional::Density => "density",
            Functional::Pressure => "pressure",
            Functional::Kurtosis => "modified kurtosis",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("state is not realizable: {functional} = {value:e}")]
    NotRealizable { functional: Functional, value: f64 },

    #[error("degenerate state: {0}")]
    Degenerate(&'static str),

    #[error("ill-conditioned system: {0}")]
    IllConditioned(String),

    #[error("unsupported order {0} (supported: 1..=4)")]
    UnsupportedOrder(usize),

    #[error("element {element} at t = {time:.6e}: {source}")]
    Element {
        element: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("CFL condition violated: dt * lambda / dx = {0:.4}")]
    CflViolation(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("problem `{0}` has no exact solution")]
    NoExactSolution(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_element(self, element: usize, time: f64) -> Error {
        Error::Element { element, time, source: Box::new(self) }
    }
}
