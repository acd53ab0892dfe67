//! The `.prt` model language, its printer, and PRISM export.

mod document;
mod lexer;
mod parser;
mod printer;
pub mod prism;

use std::fmt;

pub use document::{
    ActionBinding, BuildError, ModelDocument, ModuleBinding, NamedDistribution, NetworkSpec, QueryMode, QuerySpec,
};
pub use printer::print_model;
pub use prism::{export_prism, read_prism, PrismError, PrismStyle};

/// Version written in the `prtspace N;` header.
pub const FORMAT_VERSION: u32 = 1;

/// Byte offset and length, plus the 1-based line and column of the start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub offset: usize,
    pub len: usize,
    pub line: u32,
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Error, message: message.into(), span }
    }

    pub fn warning(message: impl Into<String>, span: Span) -> Self {
        Diagnostic { severity: Severity::Warning, message: message.into(), span }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {kind}: {}", self.span.line, self.span.column, self.message)
    }
}

/// Parses a model. On failure every diagnostic is returned, errors first.
pub fn parse_model(text: &str) -> Result<ModelDocument, Vec<Diagnostic>> {
    match parser::parse(text) {
        (Some(doc), _) => Ok(doc),
        (None, mut diags) => {
            diags.sort_by_key(|d| !d.is_error());
            Err(diags)
        }
    }
}

/// Like [`parse_model`] but also hands back warnings on success.
pub fn parse_model_full(text: &str) -> (Option<ModelDocument>, Vec<Diagnostic>) {
    parser::parse(text)
}

/// Exact conversion of decimal seconds, e.g. `0.46`, to ticks.
pub fn seconds_to_ticks(text: &str) -> Result<crate::distributions::Tick, String> {
    parser::to_ticks(text.trim(), Some("s"))
}

/// Parses a target expression over flags and `var = n` location tests.
pub fn parse_state_expr(text: &str) -> Result<crate::model::StateExpr, Vec<Diagnostic>> {
    parser::parse_expr(text)
}

/// Accepts arbitrary bytes; invalid UTF-8 is a diagnostic at the first bad
/// byte.
pub fn parse_model_bytes(bytes: &[u8]) -> Result<ModelDocument, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_model(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let text = std::str::from_utf8(good).unwrap_or_default();
            let line = 1 + text.matches('\n').count() as u32;
            let column = 1 + text.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32;
            let span = Span { offset: e.valid_up_to(), len: 1, line, column };
            Err(vec![Diagnostic::error("input is not valid UTF-8", span)])
        }
    }
}
