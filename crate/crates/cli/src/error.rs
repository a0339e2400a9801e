use std::fmt;
use std::process::ExitCode;

/// Where a run stopped; decides the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Unreadable or malformed input, or an unwritable output.
    Input,
    Hypothesis,
    Solver,
    Simulation,
    Output,
    /// A reproduced reference value missed its tolerance.
    Check,
}

impl Stage {
    pub fn exit_code(self) -> u8 {
        match self {
            Stage::Hypothesis => 3,
            Stage::Solver => 4,
            Stage::Simulation => 5,
            Stage::Input | Stage::Output => 6,
            Stage::Check => 7,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Hypothesis => "hypothesis check",
            Stage::Solver => "solver",
            Stage::Simulation => "simulation",
            Stage::Output => "output",
            Stage::Check => "reference check",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub message: String,
}

impl CliError {
    pub fn new(stage: Stage, message: impl Into<String>) -> Self {
        Self {
            stage,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.stage.exit_code())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} failed: {}", self.stage.name(), self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage to library errors. Hypothesis violations keep their own
/// stage whatever step raised them.
pub trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> AtStage<T> for aacontrol::Result<T> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| {
            let stage = match e {
                aacontrol::Error::HypothesisFailed { .. } => Stage::Hypothesis,
                aacontrol::Error::Io(_) => Stage::Output,
                _ => stage,
            };
            CliError::new(stage, e.to_string())
        })
    }
}
