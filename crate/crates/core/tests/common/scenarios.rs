//! Fixed scenarios shared by the integration tests and the acceptance gate.

use std::collections::HashMap;

use indexmap::IndexMap;
use vizagent_core::agents::{
    orchestrate, parse_processor_response, Classification, CompletionParams, ModelError,
    OrchestrateError, OrchestrateOptions, PromptBundle, ScriptedClient,
};
use vizagent_core::catalog::{render_description, FilteredSchema};
use vizagent_core::eval::{run_benchmark, BenchmarkConfig, OutcomeKind};
use vizagent_core::vql::*;

use super::{catalog, databases, golden_cases, StagedClient, Stages};

fn col(t: Option<&str>, c: &str) -> ColumnRef {
    ColumnRef {
        table: t.map(String::from),
        column: c.into(),
    }
}

fn count(arg: ColumnRef) -> SelectItem {
    SelectItem::Aggregate {
        func: AggFunc::Count,
        arg,
        distinct: false,
    }
}

fn aliased(name: &str, alias: &str) -> TableRef {
    TableRef {
        name: name.into(),
        alias: Some(alias.into()),
    }
}

/// The three VQL sentences quoted in the prompts and case study, with the
/// trees they must parse to.
pub fn reference_vqls() -> Vec<(&'static str, VqlQuery)> {
    vec![
        (
            "Visualize BAR SELECT Date_Stored, COUNT(Document_ID) FROM All_Documents GROUP BY Date_Stored BIN Date_Stored BY WEEKDAY",
            VqlQuery {
                vis: VisType::Bar,
                select: vec![SelectItem::Column(col(None, "Date_Stored")), count(col(None, "Document_ID"))],
                from: TableRef { name: "All_Documents".into(), alias: None },
                joins: vec![],
                where_clause: None,
                group_by: vec![col(None, "Date_Stored")],
                order_by: None,
                bin: Some(BinClause { column: col(None, "Date_Stored"), interval: BinInterval::Weekday }),
            },
        ),
        (
            "Visualize STACKED BAR SELECT O.order_date, SUM(O.total_amount), C.customer_type FROM Orders O JOIN Customers C ON O.customer_id = C.customer_id GROUP BY C.customer_type BIN O.order_date BY MONTH",
            VqlQuery {
                vis: VisType::StackedBar,
                select: vec![
                    SelectItem::Column(col(Some("O"), "order_date")),
                    SelectItem::Aggregate { func: AggFunc::Sum, arg: col(Some("O"), "total_amount"), distinct: false },
                    SelectItem::Column(col(Some("C"), "customer_type")),
                ],
                from: aliased("Orders", "O"),
                joins: vec![JoinClause {
                    table: aliased("Customers", "C"),
                    on_left: col(Some("O"), "customer_id"),
                    on_right: col(Some("C"), "customer_id"),
                }],
                where_clause: None,
                group_by: vec![col(Some("C"), "customer_type")],
                order_by: None,
                bin: Some(BinClause { column: col(Some("O"), "order_date"), interval: BinInterval::Month }),
            },
        ),
        (
            "Visualize LINE SELECT S.year, COUNT(S.year) FROM course C JOIN section S ON C.course_id = S.course_id WHERE C.dept_name = `Psychology' BIN S.year BY YEAR",
            VqlQuery {
                vis: VisType::Line,
                select: vec![SelectItem::Column(col(Some("S"), "year")), count(col(Some("S"), "year"))],
                from: aliased("course", "C"),
                joins: vec![JoinClause {
                    table: aliased("section", "S"),
                    on_left: col(Some("C"), "course_id"),
                    on_right: col(Some("S"), "course_id"),
                }],
                where_clause: Some(Predicate::Compare {
                    column: col(Some("C"), "dept_name"),
                    op: CompareOp::Eq,
                    value: Literal::Str("Psychology".into()),
                }),
                group_by: vec![],
                order_by: None,
                bin: Some(BinClause { column: col(Some("S"), "year"), interval: BinInterval::Year }),
            },
        ),
    ]
}

pub fn reference_vqls_parse() -> Result<(), String> {
    for (text, want) in reference_vqls() {
        let got = parse_vql(text).map_err(|e| format!("{text}: {e}"))?;
        if got != want {
            return Err(format!("{text}\n  parsed as {got:?}"));
        }
        let printed = print_vql(&got);
        // canonical form quotes with apostrophes only
        let canonical = text.replace('`', "'");
        if printed != canonical {
            return Err(format!("reprinted as {printed}"));
        }
    }
    Ok(())
}

fn between<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let a = text.find(start).expect("start marker") + start.len();
    let b = a + text[a..].find(end).expect("end marker");
    &text[a..b]
}

/// The processor template's worked example, checked against the dorm_1
/// fixture: its schema block must be what the catalog renders, and its
/// answer must parse back to the filter and label it shows.
pub fn prompt_fidelity() -> Result<(), String> {
    let bundle = PromptBundle::builtin();
    let template = &bundle.processor;
    let block = between(template, "[Schema]\n", "\n\n[Query]");
    let dorm = catalog("dorm_1");
    let rendered = render_description(&dorm, None).map_err(|e| e.to_string())?;
    if rendered != block {
        return Err(format!(
            "dorm_1 renders as\n{rendered}\nbut the example shows\n{block}"
        ));
    }
    let prompt = bundle
        .render_processor("dorm_1", &rendered, "Which dorms house the most students?")
        .map_err(|e| e.to_string())?;
    let divider = "Here is a new question:";
    let new_part = &prompt[prompt.find(divider).unwrap()..];
    if !new_part.contains(&format!("[Database Schema]\n{block}\n\n[Query]\n")) {
        return Err("rendered prompt lacks the schema block in its question part".into());
    }

    let worked = between(
        template,
        "Now we can think step by step\n",
        "\n\n==============================\nHere is a new question",
    );
    let parsed = parse_processor_response(worked).map_err(|e| e.to_string())?;
    let mut want = IndexMap::new();
    want.insert(
        "Student".to_string(),
        vec!["stuid".to_string(), "fname".to_string()],
    );
    want.insert(
        "Dorm".to_string(),
        vec!["dormid".to_string(), "dorm name".to_string()],
    );
    want.insert(
        "Lives_in".to_string(),
        vec!["stuid".to_string(), "dormid".to_string()],
    );
    if parsed.filtered_schema != FilteredSchema::new(want) {
        return Err(format!(
            "filtered schema parsed as {:?}",
            parsed.filtered_schema
        ));
    }
    if parsed.classification != Classification::Multiple {
        return Err(format!("classified as {:?}", parsed.classification));
    }
    Ok(())
}

fn golden_stages() -> HashMap<String, Stages> {
    let text = std::fs::read_to_string(super::golden().join("stages.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

const COMPLAINTS_QUERY: &str =
    "List the name of all products along with the number of complaints that they have received in a bar chart.";

fn complaints_client(validator_replies: usize, fixed: bool) -> ScriptedClient {
    let s = &golden_stages()["g09"];
    let fix = if fixed {
        s.validator[0].clone()
    } else {
        let faulty = vizagent_core::agents::extract_final_vql(&s.composer[0]).unwrap();
        format!("[Explanation]\nLooks right to me.\n\n[Corrected VQL]\n{faulty}\n")
    };
    let mut script = vec![s.processor.clone(), s.composer[0].clone()];
    script.extend(std::iter::repeat_n(fix, validator_replies));
    ScriptedClient::sequence(script)
}

fn options(bundle: &PromptBundle) -> OrchestrateOptions<'_> {
    OrchestrateOptions {
        max_iters: 3,
        params: CompletionParams::default(),
        bundle,
        observer: None,
    }
}

/// Aggregate without GROUP BY, repaired by one validator round.
pub fn group_by_refinement() -> Result<(), String> {
    let bundle = PromptBundle::builtin();
    let client = complaints_client(1, true);
    let ok = orchestrate(
        &client,
        &catalog("product_complaints"),
        COMPLAINTS_QUERY,
        &options(&bundle),
    )
    .map_err(|e| e.to_string())?;
    let t = &ok.trace;
    if t.iterations_used != 1 || t.attempts.len() != 2 {
        return Err(format!(
            "iterations_used {} with {} attempts",
            t.iterations_used,
            t.attempts.len()
        ));
    }
    let first = t.attempts[0].error.as_deref().unwrap_or_default();
    if !first.starts_with("MissingGroupBy") || !first.contains("GROUP BY") {
        return Err(format!("first attempt error: {first}"));
    }
    if !t.attempts[1].vql_text.ends_with("GROUP BY product_name") || t.attempts[1].error.is_some() {
        return Err(format!("second attempt: {:?}", t.attempts[1]));
    }
    Ok(())
}

/// A validator that never fixes anything exhausts a budget of 3.
pub fn never_correcting() -> Result<(), String> {
    let bundle = PromptBundle::builtin();
    let client = complaints_client(3, false);
    match orchestrate(
        &client,
        &catalog("product_complaints"),
        COMPLAINTS_QUERY,
        &options(&bundle),
    ) {
        Err(OrchestrateError::Failed(report)) => {
            let n = report.trace.attempts.len();
            if n != 4 {
                return Err(format!("{n} attempts"));
            }
            if report.trace.attempts.iter().any(|a| a.error.is_none()) {
                return Err("an attempt without an error".into());
            }
            if client.calls() != 5 {
                return Err(format!("{} model calls", client.calls()));
            }
            Ok(())
        }
        other => Err(format!(
            "expected budget exhaustion, got {:?}",
            other.map(|s| s.trace)
        )),
    }
}

/// Two passing cases, one with wrong expected data, one whose VQL never
/// executes; a judge scores every chart 4.
pub fn metric_partition() -> Result<(), String> {
    let mut cases: Vec<_> = golden_cases()
        .into_iter()
        .filter(|c| ["g01", "g02", "g06", "g11"].contains(&c.case_id.as_str()))
        .collect();
    // g02: ground truth off by one
    cases[1].ground_truth.data.rows[0][1] = serde_json::json!(4);
    let mut stages = golden_stages();
    let broken = "Final VQL:\nVisualize SCATTER SELECT age, height FROM Student".to_string();
    let g06 = stages.get_mut("g06").unwrap();
    g06.composer = vec![broken.clone()];
    g06.validator = vec![format!("[Corrected VQL]\n{}", &broken[11..]); 3];

    let client = StagedClient::new(&cases, stages);
    let judge = |_: &str| -> Result<String, ModelError> { Ok("4".into()) };
    let bundle = PromptBundle::builtin();
    let cfg = BenchmarkConfig {
        max_iters: 3,
        params: CompletionParams::default(),
        bundle: &bundle,
        workers: 2,
        judge: Some(&judge),
    };
    let run = run_benchmark(&cases, &client, &databases(), &cfg).map_err(|e| e.to_string())?;
    let s = &run.report.summary;
    if (s.invalid_rate, s.illegal_rate, s.pass_rate) != (25.0, 25.0, 50.0) {
        return Err(format!(
            "rates {}/{}/{}",
            s.invalid_rate, s.illegal_rate, s.pass_rate
        ));
    }
    for r in &run.records {
        let want = match r.case_id.as_str() {
            "g06" => (OutcomeKind::Invalid, Some(0.0)),
            "g02" => (OutcomeKind::Illegal, Some(0.0)),
            _ => (OutcomeKind::Pass, Some(4.0)),
        };
        if (r.outcome.kind, r.outcome.quality) != want {
            return Err(format!("{}: {:?}", r.case_id, r.outcome));
        }
    }
    if s.mean_quality.unwrap_or(f64::NAN) > s.mean_readability.unwrap_or(f64::NAN) {
        return Err("mean quality above mean readability".into());
    }
    Ok(())
}
