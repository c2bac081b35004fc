use thiserror::Error;

use crate::docking::Phase;
use crate::kinematics::Frame;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("frame mismatch: expected {expected:?} twist, got {found:?}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("step called in phase {found:?}, expected {expected:?}")]
    WrongPhase { expected: Phase, found: Phase },
    #[error("illegal docking transition {from:?} -> {to:?}")]
    IllegalTransition { from: Phase, to: Phase },
    #[error("composition failed: {0}")]
    Composition(String),
    #[error("composite mode error: {0}")]
    Mode(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("simulation diverged at t = {time:.3} s: {what}")]
    Diverged { time: f64, what: String },
    #[error("metric error: {0}")]
    Metric(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
