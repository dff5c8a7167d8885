use nlslab::LabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error(transparent)]
    Lab(#[from] LabError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 2 validation, 3 numerical failure, 4 missing inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::MissingInput(_) => 4,
            CliError::Lab(LabError::Io(e)) | CliError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 4,
            CliError::Lab(e) if e.is_numerical() => 3,
            CliError::Lab(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Validation(format!("json: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 2);
        assert_eq!(CliError::Lab(LabError::NoBoundState).exit_code(), 3);
        assert_eq!(CliError::Lab(LabError::NonFinite { t: 1.0 }).exit_code(), 3);
        assert_eq!(CliError::Lab(LabError::InvalidParameter("p".into())).exit_code(), 2);
        let nf = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(CliError::Lab(LabError::Io(nf)).exit_code(), 4);
        assert_eq!(CliError::MissingInput("run".into()).exit_code(), 4);
    }
}
