use thiserror::Error;

use crate::numerics::NumericsError;
use crate::scene::ConfigError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("polarization bound violated: lambda_max(G) = {re:e} + {im:e}j for BS {bs}")]
    SpectralBound { bs: usize, re: f64, im: f64 },
    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<SolverError>,
    },
}

impl SolverError {
    pub fn at(self, iteration: usize) -> Self {
        SolverError::AtIteration { iteration, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, SolverError>;
