//! Error classification into process exit codes.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Config,
    Data,
    Runtime,
}

impl FailureKind {
    pub fn code(self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Runtime => 4,
        }
    }
}

/// An error raised by the CLI itself with an explicit class.
#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: FailureKind, message: impl Into<String>) -> Failure {
        Failure {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Failure {
        Failure::new(FailureKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Failure {
        Failure::new(FailureKind::Data, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

fn classify_core(e: &idrr_core::Error) -> FailureKind {
    use idrr_core::Error as E;
    match e {
        E::Config(_) | E::EncoderUnavailable(_) => FailureKind::Config,
        E::SeedFailed { source, .. } => classify_core(source),
        E::HashMismatch { .. } | E::Input(_) | E::Json(_) => FailureKind::Data,
        E::Io { source, .. } => match source.kind() {
            std::io::ErrorKind::NotFound | std::io::ErrorKind::InvalidData => FailureKind::Data,
            _ => FailureKind::Runtime,
        },
        e if e.is_data_error() => FailureKind::Data,
        _ => FailureKind::Runtime,
    }
}

/// The first classified error in the chain decides; anything else is a
/// runtime failure.
pub fn classify(error: &anyhow::Error) -> FailureKind {
    for cause in error.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.kind;
        }
        if let Some(e) = cause.downcast_ref::<idrr_core::Error>() {
            return classify_core(e);
        }
    }
    FailureKind::Runtime
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes() {
        let config: anyhow::Error = idrr_core::Error::Config("x".into()).into();
        assert_eq!(classify(&config).code(), 2);
        let data: anyhow::Error = idrr_core::Error::Schema { missing: vec![] }.into();
        assert_eq!(classify(&data.context("loading")).code(), 3);
        let seed = idrr_core::Error::SeedFailed {
            seed: 1,
            source: Box::new(idrr_core::Error::Numeric("nan".into())),
        };
        assert_eq!(classify(&seed.into()).code(), 4);
        let wrapped = Err::<(), _>(Failure::config("bad")).context("outer").unwrap_err();
        assert_eq!(classify(&wrapped), FailureKind::Config);
        assert_eq!(classify(&anyhow::anyhow!("plain")), FailureKind::Runtime);
    }
}
