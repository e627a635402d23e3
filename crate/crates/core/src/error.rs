//! Load-time validation errors shared by every data loader.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Machine-readable error code. The `Display` form is the stable code string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorCode {
    SyntaxError,
    UnsupportedVersion,
    UnknownKind,
    UnknownCategory,
    DanglingParent,
    DuplicateName,
    DuplicateInstance,
    IllegalCategoryForKind,
    CrossKindParent,
    TaxonomyCycle,
    UnknownConcept,
    UnknownProperty,
    UnknownStage,
    UnknownStageProperty,
    StageNotApplicable,
    UnknownSensorClass,
    UnknownRelationshipKind,
    NonInteractiveFocal,
    SelfRelation,
    InvalidDegree,
    DuplicateEntry,
    AmbiguousTemplate,
    InvalidRating,
    AmbiguousRating,
    ReservedName,
    EmptyField,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::SyntaxError => "SyntaxError",
            ErrorCode::UnsupportedVersion => "UnsupportedVersion",
            ErrorCode::UnknownKind => "UnknownKind",
            ErrorCode::UnknownCategory => "UnknownCategory",
            ErrorCode::DanglingParent => "DanglingParent",
            ErrorCode::DuplicateName => "DuplicateName",
            ErrorCode::DuplicateInstance => "DuplicateInstance",
            ErrorCode::IllegalCategoryForKind => "IllegalCategoryForKind",
            ErrorCode::CrossKindParent => "CrossKindParent",
            ErrorCode::TaxonomyCycle => "TaxonomyCycle",
            ErrorCode::UnknownConcept => "UnknownConcept",
            ErrorCode::UnknownProperty => "UnknownProperty",
            ErrorCode::UnknownStage => "UnknownStage",
            ErrorCode::UnknownStageProperty => "UnknownStageProperty",
            ErrorCode::StageNotApplicable => "StageNotApplicable",
            ErrorCode::UnknownSensorClass => "UnknownSensorClass",
            ErrorCode::UnknownRelationshipKind => "UnknownRelationshipKind",
            ErrorCode::NonInteractiveFocal => "NonInteractiveFocal",
            ErrorCode::SelfRelation => "SelfRelation",
            ErrorCode::InvalidDegree => "InvalidDegree",
            ErrorCode::DuplicateEntry => "DuplicateEntry",
            ErrorCode::AmbiguousTemplate => "AmbiguousTemplate",
            ErrorCode::InvalidRating => "InvalidRating",
            ErrorCode::AmbiguousRating => "AmbiguousRating",
            ErrorCode::ReservedName => "ReservedName",
            ErrorCode::EmptyField => "EmptyField",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Position inside a source document, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

/// A single validation failure found while loading a data document.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub struct DataError {
    pub code: ErrorCode,
    pub message: String,
    /// Name of the offending item, used to locate it in the source text.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub subject: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub position: Option<Position>,
}

impl DataError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            subject: None,
            position: None,
        }
    }

    pub fn about(mut self, subject: impl Into<String>) -> Self {
        self.subject = Some(subject.into());
        self
    }

    pub fn at(mut self, position: Position) -> Self {
        self.position = Some(position);
        self
    }

    /// Fills in a position by searching `text` for the subject when no parser position exists.
    pub fn locate_in(mut self, text: &str) -> Self {
        if self.position.is_none() {
            if let Some(subject) = &self.subject {
                self.position = find_subject(text, subject);
            }
        }
        self
    }
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{} at {}:{}: {}", self.code, p.line, p.column, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

/// Best-effort position of the first quoted occurrence of `subject`.
fn find_subject(text: &str, subject: &str) -> Option<Position> {
    let needle = format!("\"{subject}\"");
    text.lines().enumerate().find_map(|(i, line)| {
        line.find(&needle).map(|col| Position {
            line: i + 1,
            column: col + 1,
        })
    })
}

pub type DataResult<T> = Result<T, DataError>;
