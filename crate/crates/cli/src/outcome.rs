use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use resdens::Error;

pub const VALIDATION_FAILURE: u8 = 1;
pub const USAGE_ERROR: u8 = 2;
pub const RUNTIME_ERROR: u8 = 3;

/// What a command did: lines for the user, files written, and at most one
/// failure. The exit code is read off the failure, so a nonzero code always
/// comes with a message.
#[derive(Debug, Default)]
pub struct CommandResult {
    pub summary: Vec<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
    failure: Option<(u8, String)>,
}

impl CommandResult {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn failed(code: u8, message: impl Into<String>) -> Self {
        let mut r = Self::new();
        r.fail(code, message);
        r
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::failed(USAGE_ERROR, message)
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self::failed(RUNTIME_ERROR, message)
    }

    pub fn fail(&mut self, code: u8, message: impl Into<String>) {
        assert!(code != 0);
        if self.failure.is_none() {
            self.failure = Some((code, message.into()));
        }
    }

    /// Records a library error with the exit code of its class.
    pub fn fail_with(&mut self, err: &Error) {
        self.fail(exit_code(err), err.to_string());
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.summary.push(text.into());
    }

    pub fn code(&self) -> u8 {
        self.failure.as_ref().map_or(0, |(c, _)| *c)
    }

    pub fn print(&self) {
        for w in &self.warnings {
            eprintln!("warning: {w}");
        }
        for line in &self.summary {
            println!("{line}");
        }
        for path in &self.artifacts {
            println!("wrote {}", path.display());
        }
        if let Some((_, message)) = &self.failure {
            eprintln!("error: {message}");
        }
    }

    /// Writes `name` inside `dir`, creating the directory if needed.
    pub fn write_artifact<F>(&mut self, dir: &Path, name: &str, fill: F) -> bool
    where
        F: FnOnce(&mut BufWriter<File>) -> resdens::Result<()>,
    {
        let path = dir.join(name);
        let written = fs::create_dir_all(dir)
            .map_err(Error::from)
            .and_then(|_| File::create(&path).map_err(Error::from))
            .and_then(|f| {
                let mut w = BufWriter::new(f);
                fill(&mut w)?;
                w.flush()?;
                Ok(())
            });
        match written {
            Ok(()) => {
                self.artifacts.push(path);
                true
            }
            Err(e) => {
                self.fail(RUNTIME_ERROR, format!("{}: {e}", path.display()));
                false
            }
        }
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::AllTrimmed => VALIDATION_FAILURE,
        Error::TooManyDegenerate { .. }
        | Error::QuadratureError { .. }
        | Error::DegenerateDenominator(_)
        | Error::Io(_)
        | Error::Json(_) => RUNTIME_ERROR,
        _ => USAGE_ERROR,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_follows_the_first_failure() {
        let mut r = CommandResult::new();
        assert_eq!(r.code(), 0);
        r.fail(VALIDATION_FAILURE, "A8 violated");
        r.fail(RUNTIME_ERROR, "later");
        assert_eq!(r.code(), VALIDATION_FAILURE);
    }

    #[test]
    fn error_classes() {
        assert_eq!(exit_code(&Error::AllTrimmed), 1);
        assert_eq!(exit_code(&Error::ConfigError("x".into())), 2);
        assert_eq!(
            exit_code(&Error::InvalidData { line: 3, message: "NaN".into() }),
            2
        );
        assert_eq!(
            exit_code(&Error::TooManyDegenerate { degenerate: 9, total: 10 }),
            3
        );
    }
}
