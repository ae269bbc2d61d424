use std::fmt;

use stkrige::ErrorClass;

/// A fatal error together with the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub class: ErrorClass,
    pub message: String,
}

pub type CliResult<T> = Result<T, Failure>;

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            class: ErrorClass::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Numerical => 3,
        }
    }

    /// Prefixes the message, e.g. with a file name or pipeline stage.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<stkrige::Error> for Failure {
    fn from(e: stkrige::Error) -> Self {
        Self {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::data(e.to_string())
    }
}

pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<Failure>> Context<T> for Result<T, E> {
    fn context(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().context(what))
    }
}
