use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The star/instrument observation graph cannot support the requested operation.
    #[error("dataset structure: {0}")]
    Structure(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Bad magic, unsupported version or truncated payload.
    #[error("file format: {0}")]
    Format(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("architecture spec hash mismatch: expected {expected:016x}, found {found:016x}")]
    SpecHash { expected: u64, found: u64 },

    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error classes; the command-line tool maps each to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Io => 5,
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Numeric => "numeric",
            ErrorClass::Io => "io",
        };
        f.write_str(name)
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Structure(_)
            | Error::Shape(_)
            | Error::Format(_)
            | Error::Checksum(_)
            | Error::SpecHash { .. }
            | Error::Json(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::Numeric(_) => ErrorClass::Numeric,
            Error::Io(_) => ErrorClass::Io,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_class_mapping() {
        assert_eq!(Error::Config("x".into()).class().exit_code(), 2);
        assert_eq!(Error::Checksum("x".into()).class().exit_code(), 3);
        assert_eq!(
            Error::SpecHash {
                expected: 1,
                found: 2
            }
            .class()
            .exit_code(),
            3
        );
        assert_eq!(Error::Numeric("x".into()).class().exit_code(), 4);
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(Error::from(io).class().exit_code(), 5);
    }
}
