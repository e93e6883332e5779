//! VQL: a SQL-like sentence prefixed with a chart type and optionally
//! suffixed with a BIN clause.
//!
//! ```text
//! Visualize BAR SELECT Date_Stored, COUNT(Document_ID) FROM All_Documents
//!   GROUP BY Date_Stored BIN Date_Stored BY WEEKDAY
//! ```

use std::fmt;

use serde::{Serialize, Serializer};

mod ast;
mod parser;
mod print;
pub mod resolve;
mod validate;

pub use ast::*;
pub use parser::{is_reserved, parse_vql, ParseError, RESERVED};
pub use print::{extract_sketch, print_vql};
pub use validate::validate_vql;

/// Longest message carried by a semantic or engine error.
pub const MAX_MESSAGE_LEN: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SemanticCode {
    UnknownTable,
    UnknownColumn,
    ArityViolation,
    NonNumericAggregate,
    BadBinColumn,
    MissingGroupBy,
    DuplicateAlias,
}

impl SemanticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            SemanticCode::UnknownTable => "UnknownTable",
            SemanticCode::UnknownColumn => "UnknownColumn",
            SemanticCode::ArityViolation => "ArityViolation",
            SemanticCode::NonNumericAggregate => "NonNumericAggregate",
            SemanticCode::BadBinColumn => "BadBinColumn",
            SemanticCode::MissingGroupBy => "MissingGroupBy",
            SemanticCode::DuplicateAlias => "DuplicateAlias",
        }
    }
}

impl fmt::Display for SemanticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for SemanticCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// A validation finding, rendered as `<CODE>: <message>` on one line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SemanticError {
    pub code: SemanticCode,
    pub message: String,
}

impl SemanticError {
    pub fn new(code: SemanticCode, message: String) -> Self {
        SemanticError {
            code,
            message: single_line(&message),
        }
    }
}

impl fmt::Display for SemanticError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for SemanticError {}

/// Collapses whitespace runs to single spaces and caps the length.
pub(crate) fn single_line(message: &str) -> String {
    let joined = message.split_whitespace().collect::<Vec<_>>().join(" ");
    match joined.char_indices().nth(MAX_MESSAGE_LEN) {
        Some((cut, _)) => joined[..cut].to_string(),
        None => joined,
    }
}
