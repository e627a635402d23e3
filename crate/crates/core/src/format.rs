//! Dual text/JSON document handling.
//!
//! Every data file exists in two interchangeable encodings with identical field
//! names: TOML for hand editing and JSON for machine interchange.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{DataError, DataResult, ErrorCode, Position};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DocFormat {
    #[default]
    Toml,
    Json,
}

impl DocFormat {
    /// `.json` selects JSON; everything else is read as TOML.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => DocFormat::Json,
            _ => DocFormat::Toml,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DocFormat::Toml => "toml",
            DocFormat::Json => "json",
        }
    }
}

pub fn parse<T: DeserializeOwned>(text: &str, format: DocFormat) -> DataResult<T> {
    match format {
        DocFormat::Toml => toml::from_str(text).map_err(|e| {
            let mut err = DataError::new(ErrorCode::SyntaxError, e.message().trim().to_string());
            if let Some(span) = e.span() {
                err = err.at(offset_to_position(text, span.start));
            }
            err
        }),
        DocFormat::Json => serde_json::from_str(text).map_err(|e| {
            let message = e.to_string();
            let message = match message.rfind(" at line ") {
                Some(idx) => message[..idx].to_string(),
                None => message,
            };
            DataError::new(ErrorCode::SyntaxError, message).at(Position {
                line: e.line(),
                column: e.column(),
            })
        }),
    }
}

/// Renders a value; output ends with exactly one newline.
pub fn render<T: Serialize>(value: &T, format: DocFormat) -> String {
    let mut out = match format {
        DocFormat::Toml => toml::to_string_pretty(value).expect("document types serialize to TOML"),
        DocFormat::Json => serde_json::to_string_pretty(value).expect("document types serialize to JSON"),
    };
    while out.ends_with('\n') {
        out.pop();
    }
    out.push('\n');
    out
}

pub fn check_version(found: &str, expected: &str) -> DataResult<()> {
    if found == expected {
        Ok(())
    } else {
        Err(DataError::new(
            ErrorCode::UnsupportedVersion,
            format!("schema version `{found}` is not supported (expected `{expected}`)"),
        )
        .about(found))
    }
}

fn offset_to_position(text: &str, offset: usize) -> Position {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Position { line, column }
}
