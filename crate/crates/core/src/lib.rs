//! Natural-language-to-chart engine.
//!
//! The pipeline runs three model-backed stages over a CSV database:
//! a processor that filters the schema and classifies the request, a
//! composer that writes a VQL sentence, and a validator that executes the
//! sentence in-process and feeds engine errors back for correction.
//!
//! - [`catalog`]: CSV ingestion, type inference and schema descriptions.
//! - [`vql`]: the VQL language (parse, print, validate, sketch).
//! - [`engine`]: relational execution, binning and chart specs.
//! - [`agents`]: prompt templates, model clients and orchestration.
//! - [`eval`]: rule-based benchmark evaluation.

pub mod agents;
pub mod catalog;
pub mod engine;
pub mod eval;
pub mod value;
pub mod vql;

pub use catalog::{load_database, DatabaseCatalog};
pub use engine::{translate, ChartSpec, DataTable};
pub use value::Value;
pub use vql::{parse_vql, print_vql, VqlQuery};
