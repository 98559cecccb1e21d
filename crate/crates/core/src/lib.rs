//! Ball embeddings of EL++ knowledge bases.
//!
//! The crate covers the whole pipeline: parsing and normalizing axioms,
//! saturating the subsumption hierarchy, approximating the deductive closure,
//! training ball embeddings with closure-filtered negatives, and ranking-based
//! evaluation of GCI2 completion.

pub mod kb;
pub mod closure;
pub mod reasoner;
pub mod geometry;
pub mod sampling;
pub mod config;
pub mod evaluation;
pub mod training;
pub mod toy;
pub mod commands;
