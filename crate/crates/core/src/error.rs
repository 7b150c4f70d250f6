use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular distribution: outcome {outcome} has zero probability but derivative {derivative}")]
    Singular { outcome: usize, derivative: f64 },

    #[error("infinite divergence: outcome {0} has p > 0 and q = 0")]
    InfiniteDivergence(usize),

    #[error("degenerate frequency: f0 = {f0}, fdt = {fdt}")]
    DegenerateFrequency { f0: f64, fdt: f64 },

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
