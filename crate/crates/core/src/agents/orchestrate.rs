use serde::{Deserialize, Serialize, Serializer};

use crate::catalog::{apply_filter, render_description, DatabaseCatalog, FilteredSchema};
use crate::engine::{translate, ChartSpec, DataTable};
use crate::vql::{parse_vql, print_vql, VqlQuery};

use super::stages::{run_composer, run_processor, run_validator_refine};
use super::{
    AgentError, Classification, CompletionParams, ModelClient, ModelError, ProcessorOutput,
    PromptBundle,
};

pub const DEFAULT_MAX_ITERS: usize = 3;

/// One candidate VQL and what the engine said about it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub vql_text: String,
    pub parse_ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinalChart {
    pub query: VqlQuery,
    pub spec: ChartSpec,
}

impl Serialize for FinalChart {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FinalChart", 2)?;
        st.serialize_field("vql", &print_vql(&self.query))?;
        st.serialize_field("spec", &self.spec)?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementTrace {
    pub attempts: Vec<Attempt>,
    #[serde(rename = "final")]
    pub final_chart: Option<FinalChart>,
    pub iterations_used: usize,
}

impl RefinementTrace {
    fn new() -> Self {
        RefinementTrace {
            attempts: Vec::new(),
            final_chart: None,
            iterations_used: 0,
        }
    }

    fn push(&mut self, a: Attempt) {
        self.attempts.push(a);
        self.iterations_used = self.attempts.len() - 1;
    }
}

/// Progress notifications, in pipeline order.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageEvent {
    ProcessorStarted,
    ProcessorDone {
        classification: Classification,
        filtered_schema: FilteredSchema,
        fallback: bool,
    },
    ComposerStarted,
    ComposerDone {
        vql_text: Option<String>,
    },
    AttemptEvaluated {
        index: usize,
        attempt: Attempt,
    },
    RefineStarted {
        iteration: usize,
    },
    Finished {
        success: bool,
    },
}

pub struct OrchestrateOptions<'a> {
    pub max_iters: usize,
    pub params: CompletionParams,
    pub bundle: &'a PromptBundle,
    pub observer: Option<&'a (dyn Fn(&StageEvent) + Sync)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Success {
    pub spec: ChartSpec,
    pub table: DataTable,
    pub trace: RefinementTrace,
    pub processor: ProcessorOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailureReport {
    pub last_error: String,
    pub trace: RefinementTrace,
    pub processor: Option<ProcessorOutput>,
}

#[derive(Debug, thiserror::Error)]
pub enum OrchestrateError {
    #[error("refinement budget exhausted: {}", .0.last_error)]
    Failed(Box<FailureReport>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Agent(AgentError),
}

impl From<AgentError> for OrchestrateError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Model(m) => OrchestrateError::Model(m),
            other => OrchestrateError::Agent(other),
        }
    }
}

/// Parses and executes one candidate. `Err` carries the message for the
/// refinement prompt.
fn evaluate(
    vql_text: &str,
    catalog: &DatabaseCatalog,
) -> Result<(VqlQuery, crate::engine::Translation), (bool, String)> {
    let q = parse_vql(vql_text).map_err(|e| (false, e.to_string()))?;
    let t = translate(&q, catalog).map_err(|e| (true, e.to_string()))?;
    Ok((q, t))
}

/// Processor, composer, then up to `max_iters` validator refinements.
pub fn orchestrate(
    client: &dyn ModelClient,
    catalog: &DatabaseCatalog,
    query: &str,
    opts: &OrchestrateOptions<'_>,
) -> Result<Success, OrchestrateError> {
    let notify = |e: StageEvent| {
        if let Some(f) = opts.observer {
            f(&e);
        }
    };
    notify(StageEvent::ProcessorStarted);
    let processor = run_processor(client, opts.bundle, &opts.params, catalog, query)?;
    notify(StageEvent::ProcessorDone {
        classification: processor.classification,
        filtered_schema: processor.filtered_schema.clone(),
        fallback: processor.fallback,
    });
    let scoped = match apply_filter(catalog, &processor.filtered_schema) {
        Ok((c, _)) => c,
        Err(_) => catalog.clone(),
    };
    let db_info = render_description(&scoped, None).map_err(AgentError::from)?;

    notify(StageEvent::ComposerStarted);
    let mut candidate: Result<String, String> =
        match run_composer(client, opts.bundle, &opts.params, &processor, query) {
            Ok(v) => Ok(v),
            Err(AgentError::ResponseFormat(section)) => {
                Err(AgentError::ResponseFormat(section).to_string())
            }
            Err(e) => return Err(e.into()),
        };
    notify(StageEvent::ComposerDone {
        vql_text: candidate.as_ref().ok().cloned(),
    });

    let mut trace = RefinementTrace::new();
    let mut last_vql = String::new();
    loop {
        let attempt = match &candidate {
            Ok(text) => {
                last_vql = text.clone();
                match evaluate(text, &scoped) {
                    Ok((q, t)) => {
                        let attempt = Attempt {
                            vql_text: text.clone(),
                            parse_ok: true,
                            error: None,
                        };
                        notify(StageEvent::AttemptEvaluated {
                            index: trace.attempts.len(),
                            attempt: attempt.clone(),
                        });
                        trace.push(attempt);
                        trace.final_chart = Some(FinalChart {
                            query: q,
                            spec: t.spec.clone(),
                        });
                        notify(StageEvent::Finished { success: true });
                        return Ok(Success {
                            spec: t.spec,
                            table: t.table,
                            trace,
                            processor,
                        });
                    }
                    Err((parse_ok, error)) => Attempt {
                        vql_text: text.clone(),
                        parse_ok,
                        error: Some(error),
                    },
                }
            }
            Err(error) => Attempt {
                vql_text: String::new(),
                parse_ok: false,
                error: Some(error.clone()),
            },
        };
        let error = attempt.error.clone().unwrap_or_default();
        notify(StageEvent::AttemptEvaluated {
            index: trace.attempts.len(),
            attempt: attempt.clone(),
        });
        trace.push(attempt);
        if trace.attempts.len() > opts.max_iters {
            notify(StageEvent::Finished { success: false });
            return Err(OrchestrateError::Failed(Box::new(FailureReport {
                last_error: error,
                trace,
                processor: Some(processor),
            })));
        }
        notify(StageEvent::RefineStarted {
            iteration: trace.attempts.len(),
        });
        candidate = match run_validator_refine(
            client,
            opts.bundle,
            &opts.params,
            &last_vql,
            &error,
            query,
            &db_info,
        ) {
            Ok(v) => Ok(v),
            Err(AgentError::ResponseFormat(section)) => {
                Err(AgentError::ResponseFormat(section).to_string())
            }
            Err(e) => return Err(e.into()),
        };
    }
}
