//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single bad line in a line-oriented input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

fn issue_list(issues: &[LineIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("line {}: {}", i.line, i.reason))
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// One or more malformed lines; every offending line is listed.
    #[error("{}: {} malformed line(s): {}", path.display(), issues.len(), issue_list(issues))]
    Malformed { path: PathBuf, issues: Vec<LineIssue> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Data(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn malformed(path: impl Into<PathBuf>, issues: Vec<LineIssue>) -> Self {
        Error::Malformed { path: path.into(), issues }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
