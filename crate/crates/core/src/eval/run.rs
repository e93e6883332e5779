use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{
    orchestrate, CompletionParams, ModelClient, OrchestrateError, OrchestrateOptions, PromptBundle,
    RefinementTrace,
};
use crate::catalog::{load_database, DatabaseCatalog};
use crate::engine::ChartSpec;

use super::checks::{classify_outcome, evaluate_checks};
use super::judge::judge_readability;
use super::report::{build_report, CaseSummary, MetricsReport, Scored};
use super::{BenchmarkCase, CheckResult, EvalError, Outcome};

pub struct BenchmarkConfig<'a> {
    pub max_iters: usize,
    pub params: CompletionParams,
    pub bundle: &'a PromptBundle,
    /// 0 means one worker per core.
    pub workers: usize,
    /// Readability judge; off by default.
    pub judge: Option<&'a dyn ModelClient>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub outcome: Outcome,
    pub checks: Vec<CheckResult>,
    pub iterations_used: usize,
    pub spec: Option<ChartSpec>,
    pub trace: Option<RefinementTrace>,
    /// Model or template failure, not a wrong answer.
    pub internal_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRun {
    pub report: MetricsReport,
    pub records: Vec<CaseRecord>,
}

/// One case per line; blank lines are skipped.
pub fn parse_cases(text: &str) -> Result<Vec<BenchmarkCase>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: BenchmarkCase =
            serde_json::from_str(line).map_err(|e| EvalError::CaseFormat {
                line: i + 1,
                message: e.to_string(),
            })?;
        case.validate()?;
        out.push(case);
    }
    Ok(out)
}

pub fn load_cases(path: &Path) -> Result<Vec<BenchmarkCase>, EvalError> {
    let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_cases(&text)
}

fn load_catalogs(
    cases: &[BenchmarkCase],
    root: &Path,
) -> Result<HashMap<String, DatabaseCatalog>, EvalError> {
    let mut out = HashMap::new();
    for c in cases {
        if out.contains_key(&c.db_id) {
            continue;
        }
        let id = &c.db_id;
        let plain = !id.is_empty() && !id.contains(['/', '\\']) && id != "." && id != "..";
        let dir = root.join(id);
        if !plain || !dir.is_dir() {
            return Err(EvalError::MissingDatabase(id.clone()));
        }
        let cat = load_database(&dir).map_err(|source| EvalError::Catalog {
            db_id: id.clone(),
            source,
        })?;
        out.insert(id.clone(), cat);
    }
    Ok(out)
}

fn run_case(
    case: &BenchmarkCase,
    catalog: &DatabaseCatalog,
    client: &dyn ModelClient,
    cfg: &BenchmarkConfig<'_>,
) -> CaseRecord {
    let opts = OrchestrateOptions {
        max_iters: cfg.max_iters,
        params: cfg.params,
        bundle: cfg.bundle,
        observer: None,
    };
    let result = orchestrate(client, catalog, &case.query, &opts);
    let checks = evaluate_checks(&result, &case.ground_truth);
    let surface_ok = checks.len() > 1 && checks[1].passed;
    let readability = match (&result, cfg.judge) {
        (Ok(s), Some(judge)) if surface_ok => {
            match judge_readability(judge, &s.spec, &cfg.params) {
                Ok(r) => Some(r),
                Err(e) => {
                    tracing::warn!(case = %case.case_id, error = %e, "readability judge failed");
                    None
                }
            }
        }
        _ => None,
    };
    let outcome = classify_outcome(&checks, readability);
    let (iterations_used, spec, trace, internal_fault) = match result {
        Ok(s) => (s.trace.iterations_used, Some(s.spec), Some(s.trace), false),
        Err(OrchestrateError::Failed(f)) => (f.trace.iterations_used, None, Some(f.trace), false),
        Err(_) => (0, None, None, true),
    };
    CaseRecord {
        case_id: case.case_id.clone(),
        outcome,
        checks,
        iterations_used,
        spec,
        trace,
        internal_fault,
    }
}

/// Runs every case and aggregates the metrics. All databases are loaded
/// before the first model call.
pub fn run_benchmark(
    cases: &[BenchmarkCase],
    client: &dyn ModelClient,
    catalog_root: &Path,
    cfg: &BenchmarkConfig<'_>,
) -> Result<BenchmarkRun, EvalError> {
    for c in cases {
        c.validate()?;
    }
    let catalogs = load_catalogs(cases, catalog_root)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let records: Vec<CaseRecord> = pool.install(|| {
        cases
            .par_iter()
            .map(|c| run_case(c, &catalogs[&c.db_id], client, cfg))
            .collect()
    });

    let scored: Vec<Scored> = records
        .iter()
        .map(|r| Scored {
            kind: r.outcome.kind,
            readability: r.outcome.readability,
            quality: r.outcome.quality,
        })
        .collect();
    let hardness: Vec<_> = cases.iter().map(|c| c.hardness).collect();
    let chart_type: Vec<_> = cases.iter().map(|c| c.ground_truth.chart_type[0]).collect();
    let summaries = records
        .iter()
        .map(|r| {
            let failed = r.checks.iter().find(|c| !c.passed);
            CaseSummary {
                case_id: r.case_id.clone(),
                outcome: r.outcome.kind,
                failed_check: failed.map(|c| c.name),
                detail: failed.map(|c| c.detail.clone()),
                iterations_used: r.iterations_used,
            }
        })
        .collect();
    let faults = records.iter().filter(|r| r.internal_fault).count();
    let report = build_report(&scored, &hardness, &chart_type, summaries, faults);
    Ok(BenchmarkRun { report, records })
}

/// Writes `report.json` and one `cases/<case_id>.json` per case.
pub fn write_artifacts(run: &BenchmarkRun, dir: &Path) -> Result<(), EvalError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| EvalError::Io { path, source }
    };
    let cases_dir = dir.join("cases");
    fs::create_dir_all(&cases_dir).map_err(io(&cases_dir))?;
    let report = dir.join("report.json");
    let body = serde_json::to_string_pretty(&run.report).expect("report serializes");
    fs::write(&report, body + "\n").map_err(io(&report))?;
    for r in &run.records {
        let name: String = r
            .case_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        let path = cases_dir.join(format!("{name}.json"));
        let body = serde_json::to_string_pretty(r).expect("case record serializes");
        fs::write(&path, body + "\n").map_err(io(&path))?;
    }
    Ok(())
}
