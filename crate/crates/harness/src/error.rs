use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] hopfrc_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("wav: {message} (byte {offset})")]
    Wav { offset: usize, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short category name used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        use hopfrc_core::Error as E;
        match self {
            Self::Core(E::NumericDomain(_)) => "numeric-domain",
            Self::Core(E::Normalization(_)) => "normalization",
            Self::Core(E::Divergence { .. } | E::TrainingDivergence { .. }) => "divergence",
            Self::Core(E::Contract(_)) => "contract",
            Self::Core(E::Unsupported(_)) => "unsupported",
            Self::Io { .. } => "io",
            Self::Wav { .. } | Self::Manifest { .. } | Self::Checkpoint(_) => "parse",
            Self::Config(_) => "config",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 2,
            "io" => 3,
            "parse" => 4,
            "divergence" => 6,
            _ => 5,
        }
    }
}
