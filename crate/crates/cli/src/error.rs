use thiserror::Error;

/// Failures with their process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid input, one diagnostic per line.
    #[error("{}", .0.join("\n"))]
    Input(Vec<String>),

    #[error("{0}")]
    Transform(String),

    #[error("{0}")]
    Guard(String),

    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(vec![msg.into()])
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Transform(_) => 3,
            CliError::Guard(_) => 4,
            CliError::Other(_) => 1,
        }
    }
}

impl From<osm_core::Error> for CliError {
    fn from(err: osm_core::Error) -> Self {
        use osm_core::Error as E;
        let msg = err.to_string();
        match err {
            E::InvalidProblem(_)
            | E::UnknownStudent(_)
            | E::UnknownSchool(_)
            | E::IncompleteProfile(_)
            | E::InvalidMatching(_)
            | E::InvalidPolicy(_)
            | E::InvalidSpec(_)
            | E::RankingMismatch(_) => CliError::input(msg),
            E::InvalidTransform(_) | E::RankOutOfDomain(_) => CliError::Transform(msg),
            E::GuardExceeded { .. } => CliError::Guard(msg),
            _ => CliError::Other(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
