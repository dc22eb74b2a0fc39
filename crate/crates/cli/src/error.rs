use skyfall::bench::BenchError;
use skyfall::diff::DiffError;
use skyfall::gan::GanError;
use skyfall::gmm::GmmError;
use skyfall::trajectory::TrajectoryError;

/// A failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Data(m) | CliError::Numeric(m) => m,
        }
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Io(_) => CliError::Io(e.to_string()),
            TrajectoryError::InvalidSpec(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GmmError> for CliError {
    fn from(e: GmmError) -> Self {
        match e {
            GmmError::Singular { .. } | GmmError::NonFinite(_) => CliError::Numeric(e.to_string()),
            GmmError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<GanError> for CliError {
    fn from(e: GanError) -> Self {
        match e {
            GanError::Data(t) => t.into(),
            GanError::NonFiniteLoss { .. } | GanError::Diff(DiffError::NonFinite { .. }) => {
                CliError::Numeric(e.to_string())
            }
            GanError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Model(g) => g.into(),
            BenchError::Io(_) | BenchError::Json(_) => CliError::Io(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}
