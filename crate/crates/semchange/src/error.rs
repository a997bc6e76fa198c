use std::fmt;
use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stages, named in failure messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Train,
    Similarities,
    Detect,
    Rank,
    Write,
    Eval,
    Synth,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Train => "train",
            Stage::Similarities => "similarities",
            Stage::Detect => "detect",
            Stage::Rank => "rank",
            Stage::Write => "write",
            Stage::Eval => "eval",
            Stage::Synth => "synth",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Core(#[from] semchange_core::Error),

    #[error("config: {0}")]
    Config(String),

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage { stage: Stage, source: Box<Error> },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// The failing stage, if the error was raised inside one.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Tags an error with the stage it was raised in, keeping the innermost
/// stage when one is already attached.
pub trait InStage<T> {
    fn in_stage(self, stage: Stage) -> Result<T>;
}

impl<T, E: Into<Error>> InStage<T> for std::result::Result<T, E> {
    fn in_stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| match e.into() {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
