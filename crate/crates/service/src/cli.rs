//! Command-line front end. Usage errors exit 2 (via clap), run failures 1.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vizagent_core::agents::{
    orchestrate, CompletionParams, ModelClient, OrchestrateError, OrchestrateOptions, PromptBundle,
    DEFAULT_MAX_ITERS, MAX_SHOTS,
};
use vizagent_core::catalog::{load_database, render_description, DatabaseCatalog};
use vizagent_core::engine::render_chart;
use vizagent_core::eval::{
    load_cases, run_benchmark, write_artifacts, BenchmarkConfig, OutcomeKind,
};
use vizagent_core::vql::{parse_vql, print_vql, validate_vql};
use vizagent_core::{translate, VqlQuery};

use crate::api::{query_body, AppState};
use crate::config::{ModelSettings, ServiceConfig};
use crate::llm::client_from_settings;

#[derive(Debug, Parser)]
#[command(
    name = "vizagent",
    version,
    about = "Natural language to charts over CSV databases"
)]
pub struct Cli {
    /// Report errors on stderr as JSON {code, message}.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Replay this digest transcript instead of calling the live model.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    pub max_iters: usize,
    #[arg(long, default_value_t = MAX_SHOTS)]
    pub shots: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question against a database directory.
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        q: String,
        /// Also write the chart spec JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Run a benchmark file and write the metrics report.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Directory for per-case records.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        /// 0 means one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Score readability of rendered specs with the same model.
        #[arg(long)]
        judge: bool,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// VQL tools; the query is read from stdin.
    Vql {
        #[command(subcommand)]
        action: VqlAction,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the schema description used in prompts.
    Describe {
        #[arg(long)]
        db: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum VqlAction {
    /// Print the canonical form.
    Parse,
    /// Validate against a database.
    Check {
        #[arg(long)]
        db: PathBuf,
    },
    /// Execute and print the chart spec JSON.
    Translate {
        #[arg(long)]
        db: PathBuf,
        /// Also render a PNG.
        #[arg(long)]
        png: Option<PathBuf>,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
}

impl CliError {
    fn new(code: impl Into<String>, message: impl ToString) -> Self {
        CliError {
            code: code.into(),
            message: message.to_string(),
        }
    }
}

type CliResult = Result<(), CliError>;

pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json {
                eprintln!("{}", json!({"code": e.code, "message": e.message}));
            } else {
                eprintln!("error: {}", e.message);
            }
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> CliResult {
    match cmd {
        Command::Query { db, q, out, model } => query(&db, &q, out.as_deref(), &model),
        Command::Eval {
            bench,
            data,
            report,
            artifacts,
            workers,
            judge,
            model,
        } => eval(
            &bench,
            &data,
            &report,
            artifacts.as_deref(),
            workers,
            judge,
            &model,
        ),
        Command::Vql { action } => vql(action),
        Command::Serve { config } => serve(&config),
        Command::Describe { db } => {
            let text = render_description(&catalog(&db)?, None)
                .map_err(|e| CliError::new("CatalogError", e))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn catalog(dir: &Path) -> Result<DatabaseCatalog, CliError> {
    load_database(dir).map_err(|e| CliError::new("CatalogError", e))
}

fn client(m: &ModelArgs) -> Result<Arc<dyn ModelClient>, CliError> {
    let settings = ModelSettings {
        transcript: m.transcript.clone(),
        ..ModelSettings::default()
    };
    client_from_settings(&settings).map_err(|e| CliError::new("ModelUnavailable", e))
}

fn bundle(m: &ModelArgs) -> Result<PromptBundle, CliError> {
    PromptBundle::builtin()
        .with_shot_count(m.shots)
        .map_err(|e| CliError::new("UsageError", e))
}

fn write(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text)
        .map_err(|e| CliError::new("IoError", format!("{}: {e}", path.display())))
}

fn query(db: &Path, q: &str, out: Option<&Path>, m: &ModelArgs) -> CliResult {
    let cat = catalog(db)?;
    let client = client(m)?;
    let bundle = bundle(m)?;
    let opts = OrchestrateOptions {
        max_iters: m.max_iters,
        params: CompletionParams::default(),
        bundle: &bundle,
        observer: None,
    };
    let result = orchestrate(client.as_ref(), &cat, q, &opts);
    if let Some(body) = query_body(&result) {
        println!(
            "{}",
            serde_json::to_string_pretty(&body).expect("body serializes")
        );
    }
    match result {
        Ok(s) => {
            if let Some(path) = out {
                write(path, &s.spec.to_json())?;
            }
            Ok(())
        }
        Err(OrchestrateError::Failed(f)) => Err(CliError::new("RefinementExhausted", f.last_error)),
        Err(OrchestrateError::Model(e)) => Err(CliError::new("ModelUnavailable", e)),
        Err(e) => Err(CliError::new("AgentError", e)),
    }
}

fn eval(
    bench: &Path,
    data: &Path,
    report: &Path,
    artifacts: Option<&Path>,
    workers: usize,
    judge: bool,
    m: &ModelArgs,
) -> CliResult {
    let cases = load_cases(bench).map_err(|e| CliError::new("CaseFormat", e))?;
    let client = client(m)?;
    let bundle = bundle(m)?;
    let cfg = BenchmarkConfig {
        max_iters: m.max_iters,
        params: CompletionParams::default(),
        bundle: &bundle,
        workers,
        judge: judge.then_some(client.as_ref()),
    };
    let run = run_benchmark(&cases, client.as_ref(), data, &cfg).map_err(|e| {
        let code = e
            .to_string()
            .split(':')
            .next()
            .unwrap_or("EvalError")
            .to_string();
        CliError::new(code, e)
    })?;
    let body = serde_json::to_string_pretty(&run.report).expect("report serializes");
    write(report, &(body + "\n"))?;
    if let Some(dir) = artifacts {
        write_artifacts(&run, dir).map_err(|e| CliError::new("IoError", e))?;
    }
    let s = &run.report.summary;
    eprintln!(
        "{} cases: pass {:.2}%, invalid {:.2}%, illegal {:.2}%",
        s.n_cases, s.pass_rate, s.invalid_rate, s.illegal_rate
    );
    let faults: Vec<&str> = run
        .records
        .iter()
        .filter(|r| r.internal_fault && r.outcome.kind == OutcomeKind::Invalid)
        .map(|r| r.case_id.as_str())
        .collect();
    if faults.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            "InternalFault",
            format!("internal faults in cases {}", faults.join(", ")),
        ))
    }
}

fn stdin_vql() -> Result<VqlQuery, CliError> {
    let mut text = String::new();
    std::io::stdin()
        .read_to_string(&mut text)
        .map_err(|e| CliError::new("IoError", e))?;
    parse_vql(text.trim()).map_err(|e| CliError::new("ParseError", e))
}

fn vql(action: VqlAction) -> CliResult {
    let q = stdin_vql()?;
    match action {
        VqlAction::Parse => println!("{}", print_vql(&q)),
        VqlAction::Check { db } => {
            let errors = validate_vql(&q, &catalog(&db)?);
            if let Some(first) = errors.first() {
                let all: Vec<String> = errors.iter().map(ToString::to_string).collect();
                return Err(CliError::new(first.code.as_str(), all.join("\n")));
            }
            println!("ok");
        }
        VqlAction::Translate { db, png } => {
            let t = translate(&q, &catalog(&db)?).map_err(|e| CliError::new(e.code.as_str(), e))?;
            if let Some(path) = png {
                render_chart(&t.spec, &path).map_err(|e| CliError::new("RenderError", e))?;
            }
            println!("{}", t.spec.to_json());
        }
    }
    Ok(())
}

fn serve(config: &Path) -> CliResult {
    let cfg = ServiceConfig::load(config).map_err(|e| CliError::new("ConfigError", e))?;
    let client =
        client_from_settings(&cfg.model).map_err(|e| CliError::new("ModelUnavailable", e))?;
    let mut rt = tokio::runtime::Builder::new_multi_thread();
    if cfg.workers > 0 {
        rt.worker_threads(cfg.workers);
    }
    let rt = rt
        .enable_all()
        .build()
        .map_err(|e| CliError::new("IoError", e))?;
    let state = AppState::new(cfg, client).map_err(|e| CliError::new("ConfigError", e))?;
    rt.block_on(crate::api::serve(state))
        .map_err(|e| CliError::new("BindError", e))
}
