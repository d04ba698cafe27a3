use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis layers.
///
/// Netlist syntax problems have their own type, [`crate::netlist::ParseError`],
/// because they always carry a source position.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("operation `{op}` is not supported for a fixed (zero-variance) distribution")]
    UnsupportedForFixed { op: &'static str },
    #[error("value {value} is outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },
    #[error("resonant frequency requested but the frequency constant is not calibrated")]
    Uncalibrated,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("metric `{metric}` is not provided by the {device} model")]
    UnsupportedMetric { metric: String, device: &'static str },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("evaluation failed at {param} = {value}: {source}")]
    Perturbation {
        param: String,
        value: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("u-space gradient of `{metric}` is zero; no finite worst-case distance")]
    DegenerateGradient { metric: String },
    #[error("worst-case iteration did not converge after {iterations} iterations (last step {last_step:e})")]
    NotConverged {
        iterations: usize,
        last_step: f64,
        last_u: Vec<f64>,
    },
    #[error("no specification-violating point within u-space radius {radius}")]
    NoBoundaryWithinRadius { radius: f64 },
}
