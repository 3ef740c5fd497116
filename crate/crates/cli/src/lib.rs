//! Command-line front end for the `limid-core` solver.

pub mod commands;
pub mod document;

pub use commands::{run, Cli};
pub use document::{parse, parse_unvalidated, serialize, DiagramDocument, DocumentError};
