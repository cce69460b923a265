use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    LexError,
    UnclosedRing,
    UnmatchedParen,
    ValenceViolation,
    KekulizationFailure,
    EmptyInput,
}

impl DiagnosticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticKind::LexError => "lex_error",
            DiagnosticKind::UnclosedRing => "unclosed_ring",
            DiagnosticKind::UnmatchedParen => "unmatched_paren",
            DiagnosticKind::ValenceViolation => "valence_violation",
            DiagnosticKind::KekulizationFailure => "kekulization_failure",
            DiagnosticKind::EmptyInput => "empty_input",
        }
    }
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located problem found while reading or checking a SMILES string.
///
/// Renders as `kind@position: message`.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind}@{position}: {message}")]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub position: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, position: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            position,
            message: message.into(),
        }
    }

    /// Short `kind@position` form used in line-oriented CLI output.
    pub fn short(&self) -> String {
        format!("{}@{}", self.kind, self.position)
    }
}
