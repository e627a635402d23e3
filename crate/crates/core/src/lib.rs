//! Ontology-driven generation and assessment of perception triggering conditions.

pub mod error;
pub mod format;
pub mod ontology;
pub mod perception;
pub mod assessment;
pub mod effects;
pub mod generation;
pub mod relationship;
pub mod report;
pub mod templates;
pub mod testcase;

pub use error::{DataError, DataResult, ErrorCode, Position};
pub use format::DocFormat;
