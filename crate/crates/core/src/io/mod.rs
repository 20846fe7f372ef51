//! File formats: detection submissions, ground-truth annotations and class lists.

mod ground_truth;
pub mod rle;
mod submission;

use std::fmt;

use serde::Serialize;

pub use ground_truth::{ground_truth_class_names, parse_ground_truth, serialize_ground_truth, GroundTruthDocument};
pub use submission::{parse_submission, submission_class_count, DetectionRecord, SubmissionDocument};

/// What went wrong with one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    MalformedSyntax,
    WrongProbVectorLength,
    InvalidProbability,
    NegativeVariance,
    NonSymmetricCovariance,
    NotPositiveSemidefinite,
    NonFinite,
    InvertedBox,
    RleLengthMismatch,
    UnknownClass,
    EmptyMask,
    PixelCountMismatch,
}

/// One violation, located by frame key and record position when known.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub frame: Option<String>,
    pub record: Option<usize>,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn new(kind: DiagnosticKind, frame: Option<&str>, record: Option<usize>, message: impl Into<String>) -> Self {
        Self { kind, frame: frame.map(str::to_string), record, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.frame, self.record) {
            (Some(fr), Some(r)) => write!(f, "frame {fr}, record {r}: ")?,
            (Some(fr), None) => write!(f, "frame {fr}: ")?,
            (None, _) => {}
        }
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Every violation found in a document.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn kinds(&self) -> Vec<DiagnosticKind> {
        self.diagnostics.iter().map(|d| d.kind).collect()
    }

    pub(crate) fn push(&mut self, d: Diagnostic) {
        self.diagnostics.push(d);
    }

    pub(crate) fn into_result<V>(self, value: V) -> Result<V, ValidationReport> {
        if self.diagnostics.is_empty() {
            Ok(value)
        } else {
            Err(self)
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

pub(crate) fn malformed(message: impl Into<String>) -> ValidationReport {
    ValidationReport { diagnostics: vec![Diagnostic::new(DiagnosticKind::MalformedSyntax, None, None, message)] }
}

/// Reads a class list: either a JSON array of names or one name per line.
/// Blank lines and `#` comments are skipped in the line form.
pub fn parse_class_list(text: &str) -> Result<Vec<String>, ValidationReport> {
    let trimmed = text.trim_start();
    let names: Vec<String> = if trimmed.starts_with('[') {
        serde_json::from_str(trimmed).map_err(|e| malformed(format!("class list: {e}")))?
    } else {
        text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_string).collect()
    };
    if names.is_empty() {
        return Err(malformed("class list is empty"));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
        return Err(malformed(format!("class `{dup}` listed twice")));
    }
    Ok(names)
}
