use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("address error: {0}")]
    Address(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("calibration error: {0}")]
    Calibration(String),
    #[error("pattern spec error: {0}")]
    Spec(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("undefined analog behavior at {time_ps} ps on bank {bank}: {detail}")]
    UndefinedAnalog { time_ps: u64, bank: u32, detail: String },
    #[error("simulation diagnostic: {0}")]
    Diagnostic(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    /// True for errors caused by bad input rather than by a simulation outcome.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            SimError::Config(_)
                | SimError::Address(_)
                | SimError::Shape(_)
                | SimError::Calibration(_)
                | SimError::Spec(_)
                | SimError::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
