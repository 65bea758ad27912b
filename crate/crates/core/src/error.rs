use thiserror::Error;

/// Errors raised by model construction, simulation and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("range error: t = {t} outside [0, {horizon}]")]
    Range { t: f64, horizon: f64 },
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical blow-up at node {node}")]
    BlowUp { node: usize },
    #[error("empty band sample")]
    EmptyBandSample,
    #[error("no valid boundary starts")]
    NoBoundaryStarts,
    #[error("degenerate table: {0}")]
    DegenerateTable(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
