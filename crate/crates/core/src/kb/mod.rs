//! EL++ knowledge base types, file formats and normalization.

mod axiom;
mod dataset;
mod normalize;
mod sexpr;
mod signature;
mod tsv;

use std::path::PathBuf;

use thiserror::Error;

pub use axiom::{AxiomDisplay, Form, NormalizedAxiom};
pub use dataset::{load_dataset, write_dataset, KnowledgeBase};
pub use normalize::normalize;
pub use sexpr::{format_general, parse_general, ConceptExpr, GeneralAxiom};
pub use signature::{ClassId, RelId, Signature, BOT_NAME, FRESH_PREFIX, TOP_NAME};
pub use tsv::{format_axiom, parse_normalized, serialize_normalized};
pub(crate) use tsv::parse_line;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{line}:{column}: {reason}")]
    Syntax {
        line: usize,
        column: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    File { path: PathBuf, reason: String },
    #[error("{0}")]
    Dataset(String),
}
