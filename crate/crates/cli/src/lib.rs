//! Command-line workbench over the `trigcond` library.

pub mod workbench;

pub use workbench::{execute, Command, Diagnostic, Outcome, Overrides, ProjectConfig, ReportFormat, WorkbenchError};
