//! Model-backed stages and the refinement loop that drives them.
//!
//! The processor narrows the schema and labels the request SINGLE or
//! MULTIPLE, the composer writes VQL, and failed VQL goes back through the
//! validator prompt together with the engine's error message.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, FilteredSchema};

mod client;
mod orchestrate;
mod prompts;
mod stages;

pub use client::{
    parse_transcript, prompt_digest, write_transcript, CompletionParams, Fixture, FixtureError,
    MatchKey, MatchMode, ModelClient, ModelError, RecordingClient, ScriptedClient,
};
pub use orchestrate::{
    orchestrate, Attempt, FailureReport, FinalChart, OrchestrateError, OrchestrateOptions,
    RefinementTrace, StageEvent, Success, DEFAULT_MAX_ITERS,
};
pub use prompts::{render_template, template_slots, PromptBundle, TemplateError, MAX_SHOTS};
pub use stages::{
    classify_rule, extract_corrected_vql, extract_final_vql, parse_filter_block,
    parse_processor_response, run_composer, run_processor, run_validator_refine,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Single,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessorOutput {
    pub filtered_schema: FilteredSchema,
    pub new_schema_text: String,
    pub augmented_explanation: String,
    pub classification: Classification,
    /// Set when the model's answer was unusable twice and the full schema
    /// was used instead.
    pub fallback: bool,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("ResponseFormatError: missing or garbled section '{0}'")]
    ResponseFormat(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
}
