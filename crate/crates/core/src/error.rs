use fdrelay_control::ControlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("model error: {0}")]
    Model(String),
    #[error("delay L*N/h = {ratio} is not an integer number of fast steps")]
    Representability { ratio: f64 },
    #[error("interconnection error: {0}")]
    Interconnection(String),
    #[error("feedback interconnection is not well posed (I - D22*Dk is singular)")]
    WellPosedness,
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("controller step {controller} s does not match sample period {expected} s")]
    StepMismatch { controller: f64, expected: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("non-finite sample at fast step {step}")]
    NonFinite { step: usize },
    #[error("framing error: {0}")]
    Framing(String),
}

pub type Result<T> = std::result::Result<T, Error>;
