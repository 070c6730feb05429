use std::fmt;

use crate::lexer::Pos;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ErrorKind {
    Syntax,
    Type,
    UnknownIdentifier,
    ConfigInvalid,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Type => "type error",
            ErrorKind::UnknownIdentifier => "unknown identifier",
            ErrorKind::ConfigInvalid => "invalid config",
        })
    }
}

/// A model-file diagnostic: `line:col: kind: reason`, on one line.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("{line}:{col}: {kind}: {message}")]
pub struct ParseError {
    pub kind: ErrorKind,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ErrorKind, pos: Pos, message: impl Into<String>) -> Self {
        ParseError {
            kind,
            line: pos.line,
            col: pos.col,
            message: message.into(),
        }
    }
}
