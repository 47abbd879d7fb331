use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("engine envelope violated at omega={omega:.3} rad/s, torque={torque:.3} N·m")]
    Envelope { omega: f64, torque: f64 },
    #[error("invalid powertrain: {0}")]
    InvalidPowertrain(String),
    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),
    #[error("coordinate {value} outside range [{lo}, {hi}]")]
    Range { value: f64, lo: f64, hi: f64 },
    #[error("alignment: {0}")]
    Alignment(String),
    #[error("no feasible candidate among {0}")]
    NoFeasibleCandidate(usize),
    #[error("driving cycle exhausted at t={0:.2} s")]
    CycleExhausted(f64),
    #[error("fuel efficiency undefined for zero distance")]
    UndefinedEfficiency,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
