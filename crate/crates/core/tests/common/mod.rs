#![allow(dead_code)]

pub mod gen;
pub mod props;
pub mod reference;
pub mod scenarios;

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Mutex;

use serde::Deserialize;
use vizagent_core::agents::{
    write_transcript, CompletionParams, MatchMode, ModelClient, ModelError, PromptBundle,
    RecordingClient, ScriptedClient,
};
use vizagent_core::catalog::{load_database, DatabaseCatalog};
use vizagent_core::eval::{
    load_cases, run_benchmark, BenchmarkCase, BenchmarkConfig, BenchmarkRun,
};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn databases() -> PathBuf {
    fixtures().join("databases")
}

pub fn golden() -> PathBuf {
    fixtures().join("golden")
}

pub fn catalog(db_id: &str) -> DatabaseCatalog {
    load_database(&databases().join(db_id)).unwrap()
}

pub fn golden_cases() -> Vec<BenchmarkCase> {
    load_cases(&golden().join("cases.jsonl")).unwrap()
}

pub fn golden_client() -> ScriptedClient {
    ScriptedClient::from_path(MatchMode::Digest, &golden().join("transcripts.jsonl")).unwrap()
}

pub fn run_golden(client: &dyn ModelClient, workers: usize) -> BenchmarkRun {
    let bundle = PromptBundle::builtin();
    let cfg = BenchmarkConfig {
        max_iters: 3,
        params: CompletionParams::default(),
        bundle: &bundle,
        workers,
        judge: None,
    };
    run_benchmark(&golden_cases(), client, &databases(), &cfg).unwrap()
}

#[derive(Debug, Deserialize)]
pub struct Stages {
    pub processor: String,
    pub composer: Vec<String>,
    #[serde(default)]
    pub validator: Vec<String>,
}

/// Answers by stage and case, using the hand-written responses in
/// `stages.json`.
pub struct StagedClient {
    cases: Vec<(String, String)>,
    stages: HashMap<String, Stages>,
    counters: Mutex<HashMap<(String, &'static str), usize>>,
    bundle: PromptBundle,
}

impl StagedClient {
    pub fn golden() -> Self {
        let text = std::fs::read_to_string(golden().join("stages.json")).unwrap();
        StagedClient::new(&golden_cases(), serde_json::from_str(&text).unwrap())
    }

    pub fn new(cases: &[BenchmarkCase], stages: HashMap<String, Stages>) -> Self {
        StagedClient {
            cases: cases
                .iter()
                .map(|c| (c.case_id.clone(), c.query.clone()))
                .collect(),
            stages,
            counters: Mutex::new(HashMap::new()),
            bundle: PromptBundle::builtin(),
        }
    }

    fn stage(&self, prompt: &str) -> &'static str {
        let head = |t: &str| t[..60].to_string();
        if prompt.starts_with(&head(&self.bundle.processor)) {
            "processor"
        } else if prompt.starts_with(&head(&self.bundle.validator)) {
            "validator"
        } else {
            "composer"
        }
    }
}

impl ModelClient for StagedClient {
    fn complete(&self, prompt: &str, _: &CompletionParams) -> Result<String, ModelError> {
        // the template examples quote other questions; the new one comes last
        let case_id = self
            .cases
            .iter()
            .filter_map(|(id, q)| prompt.rfind(q.as_str()).map(|at| (at, q.len(), id)))
            .max()
            .map(|(_, _, id)| id.clone())
            .ok_or_else(|| ModelError::MockMiss("no case query in prompt".into()))?;
        let stage = self.stage(prompt);
        let s = &self.stages[&case_id];
        let mut counters = self.counters.lock().unwrap();
        let n = counters.entry((case_id.clone(), stage)).or_insert(0);
        let pick = match stage {
            "processor" => Some(&s.processor),
            "composer" => s.composer.get(*n),
            _ => s.validator.get(*n),
        };
        *n += 1;
        pick.cloned()
            .ok_or_else(|| ModelError::MockMiss(format!("{case_id}: no {stage} response #{n}")))
    }
}

/// Runs the golden set through the staged client, one case at a time, and
/// returns the digest transcript.
pub fn record_golden() -> String {
    let rec = RecordingClient::new(StagedClient::golden());
    let run = run_golden(&rec, 1);
    assert_eq!(
        run.report.summary.pass, run.report.summary.n_cases,
        "{:#?}",
        run.report.cases
    );
    write_transcript(&rec.fixtures())
}
