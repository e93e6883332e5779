//! Benchmark evaluation.
//!
//! Each case runs through the orchestrator, then through an ordered chain of
//! checks. The first failing check decides whether the case is Invalid (no
//! usable chart) or Illegal (a chart, but the wrong one).

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::ModelError;
use crate::catalog::CatalogError;
use crate::engine::SortBy;
use crate::vql::{SortDirection, VisType};

mod checks;
mod judge;
mod report;
mod run;

pub use checks::{
    check_chart_type, check_data, check_execution, check_order, check_surface_form,
    classify_outcome, compare_tuples, evaluate_checks, Cell, Tuple,
};
pub use judge::{judge_readability, parse_score, READABILITY_TEMPLATE};
pub use report::{largest_remainder_rates, CaseSummary, MetricsReport, Rates, NOT_EVALUATED};
pub use run::{
    load_cases, parse_cases, run_benchmark, write_artifacts, BenchmarkConfig, BenchmarkRun,
    CaseRecord,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    ExtraHard,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [
        Hardness::Easy,
        Hardness::Medium,
        Hardness::Hard,
        Hardness::ExtraHard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::ExtraHard => "extra_hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Group,
}

/// Expected rows. `channels` names the meaning of each row position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthData {
    pub channels: Vec<Channel>,
    pub rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthSort {
    pub channel: SortBy,
    pub direction: SortDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Acceptable marks.
    pub chart_type: Vec<VisType>,
    pub data: GroundTruthData,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sort: Option<GroundTruthSort>,
    /// When set, the data check does not try the x/y swap.
    #[serde(default)]
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub case_id: String,
    pub db_id: String,
    pub query: String,
    pub hardness: Hardness,
    pub ground_truth: GroundTruth,
}

impl BenchmarkCase {
    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |reason: &str| {
            Err(EvalError::InvalidCase {
                case_id: self.case_id.clone(),
                reason: reason.to_string(),
            })
        };
        let gt = &self.ground_truth;
        if gt.chart_type.is_empty() {
            return bad("empty chart_type set");
        }
        if gt.data.rows.is_empty() {
            return bad("empty ground-truth data");
        }
        let ch = &gt.data.channels;
        let has = |c| ch.iter().filter(|&&x| x == c).count() == 1;
        if !has(Channel::X) || !has(Channel::Y) || ch.len() > 3 {
            return bad("channels must name x and y once, plus an optional group");
        }
        if ch.len() == 3 && !has(Channel::Group) {
            return bad("third channel must be group");
        }
        if let Some(r) = gt.data.rows.iter().find(|r| r.len() != ch.len()) {
            return bad(&format!(
                "row of width {} under {} channels",
                r.len(),
                ch.len()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CheckName {
    Execution,
    SurfaceForm,
    ChartType,
    Data,
    Order,
}

impl CheckName {
    /// Failures at these checks mean no usable chart.
    pub fn is_invalid_type(self) -> bool {
        matches!(self, CheckName::Execution | CheckName::SurfaceForm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: CheckName,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn pass(name: CheckName) -> Self {
        CheckResult {
            name,
            passed: true,
            detail: String::new(),
        }
    }

    pub fn fail(name: CheckName, detail: impl Into<String>) -> Self {
        let mut detail = detail.into();
        if detail.is_empty() {
            detail = "check failed".to_string();
        }
        CheckResult {
            name,
            passed: false,
            detail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Invalid,
    Illegal,
    Pass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub readability: Option<f64>,
    /// 0 for failed cases; the readability score for passing ones, unset
    /// when no judge ran.
    pub quality: Option<f64>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("MissingDatabase: {0}")]
    MissingDatabase(String),
    #[error("catalog {db_id}: {source}")]
    Catalog {
        db_id: String,
        #[source]
        source: CatalogError,
    },
    #[error("case file line {line}: {message}")]
    CaseFormat { line: usize, message: String },
    #[error("case {case_id}: {reason}")]
    InvalidCase { case_id: String, reason: String },
    #[error("ScoreParseError: no score in {0:?}")]
    ScoreParse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}
