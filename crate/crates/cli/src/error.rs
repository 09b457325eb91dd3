use std::fmt;
use std::path::Path;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Synth,
    Ingest,
    Rank,
    Topics,
    Fit,
    Simulate,
    Check,
    Analyze,
    Forecast,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Synth => "synth",
            Stage::Ingest => "ingest",
            Stage::Rank => "rank",
            Stage::Topics => "topics",
            Stage::Fit => "fit",
            Stage::Simulate => "simulate",
            Stage::Check => "check",
            Stage::Analyze => "analyze",
            Stage::Forecast => "forecast",
        }
    }
}

#[derive(Debug)]
enum Kind {
    Usage(String),
    Data(String),
    Numerical(String),
}

/// A stage-tagged failure carrying its exit code class.
#[derive(Debug)]
pub struct CliError {
    stage: Stage,
    kind: Kind,
}

impl CliError {
    pub fn usage(stage: Stage, message: impl Into<String>) -> Self {
        CliError {
            stage,
            kind: Kind::Usage(message.into()),
        }
    }

    pub fn data(stage: Stage, message: impl Into<String>) -> Self {
        CliError {
            stage,
            kind: Kind::Data(message.into()),
        }
    }

    pub fn core(stage: Stage, e: hiring_core::Error) -> Self {
        let kind = if e.is_numerical() {
            Kind::Numerical(e.to_string())
        } else {
            Kind::Data(e.to_string())
        };
        CliError { stage, kind }
    }

    pub fn io(stage: Stage, path: &Path, e: impl fmt::Display) -> Self {
        Self::data(stage, format!("{}: {e}", path.display()))
    }

    /// 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        match self.kind {
            Kind::Usage(_) => 1,
            Kind::Data(_) => 2,
            Kind::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (class, msg) = match &self.kind {
            Kind::Usage(m) => ("usage error", m),
            Kind::Data(m) => ("data error", m),
            Kind::Numerical(m) => ("numerical failure", m),
        };
        write!(f, "[{}] {class}: {msg}", self.stage.name())
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage to library results.
pub trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> StageExt<T> for hiring_core::Result<T> {
    fn at(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError::core(stage, e))
    }
}
