//! The `.kb` knowledge-base format and the `.ctx` context format.
//!
//! A `.kb` document is a sequence of blocks. Each block starts with a header
//! line in column 1; its attributes follow on indented lines. `#` starts a
//! comment. Blocks may appear in any order; the order of values in a
//! `property` declaration defines their ordinal rank.
//!
//! ```text
//! control authn
//!   description "Authentication"
//!
//! property sec-lev context
//!   values low, high
//!   question "Which level of security is required?"
//!
//! property costs pattern
//!   values low, medium, high
//!
//! pattern password
//!   costs = low
//!   child "password.kb"
//!
//! filter F1
//!   when sec-lev = high
//!   then costs != low
//!   message "..."
//!
//! criterion costs
//!   from costs inverse
//!
//! weights
//!   costs = 1
//!
//! weights W1
//!   when sec-lev = high
//!   costs = -0.5
//! ```

mod context_file;
mod lexer;
mod lint;
mod parser;
mod serialize;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use context_file::{parse_context, serialize_context};
pub use lint::{lint_kb, LintKind, LintWarning, MAX_LINT_CONTEXTS};
pub use parser::{parse_kb, parse_kb_named};
pub use serialize::serialize_kb;

/// Position of a diagnostic. Line and column are 1-based; column and length
/// count characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: SourceSpan,
    /// Tokens that would have been accepted (syntax errors only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<String>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            DiagnosticKind::Syntax => "syntax error",
            DiagnosticKind::Semantic => "error",
        };
        write!(f, "{}: {kind}: {}", self.span, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

/// One or more diagnostics, never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    diagnostics: Vec<Diagnostic>,
}

impl ParseError {
    pub(crate) fn new(diagnostics: Vec<Diagnostic>) -> Self {
        assert!(!diagnostics.is_empty());
        Self { diagnostics }
    }

    pub(crate) fn single(diagnostic: Diagnostic) -> Self {
        Self::new(vec![diagnostic])
    }

    pub fn first(&self) -> &Diagnostic {
        &self.diagnostics[0]
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn kind(&self) -> DiagnosticKind {
        self.first().kind
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}
