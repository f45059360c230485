use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: longhorizon::Error,
    },

    #[error(transparent)]
    Core(#[from] longhorizon::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn core_exit_code(e: &longhorizon::Error) -> i32 {
    use longhorizon::Error as E;
    match e {
        E::Argument(_) | E::Schema(_) | E::Json(_) => EXIT_CONFIG,
        E::Cell { .. } | E::Data(_) | E::Positivity { .. } | E::NoOverlap(_) | E::Csv(_) | E::Io { .. } => EXIT_DATA,
        E::Numeric(_) => EXIT_NUMERIC,
    }
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Stage { source, .. } | CliError::Core(source) => core_exit_code(source),
        }
    }
}

/// Attach a stage name to a library error.
pub trait InStage<T> {
    fn stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T> InStage<T> for longhorizon::Result<T> {
    fn stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
