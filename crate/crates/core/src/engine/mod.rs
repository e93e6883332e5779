//! In-process execution of VQL.
//!
//! Instead of emitting a plotting script, a query is executed directly over
//! the catalog and summarized as a declarative [`ChartSpec`]. Failures come
//! back as single-line [`EngineError`]s that feed the refinement prompt.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::catalog::DatabaseCatalog;
use crate::vql::{self, SelectItem, SemanticCode, SemanticError, VqlQuery};

mod bin;
mod chart;
mod exec;
mod render;
mod table;

pub use bin::{apply_binning, bucket_value, MONTH_NAMES, WEEKDAY_NAMES};
pub use chart::{
    build_chart_spec, ChartSpec, GroupEncoding, SortBy, SortSpec, ValueKind, XEncoding, YEncoding,
    SPEC_VERSION,
};
pub use exec::execute_relational;
pub use render::{render_chart, render_png, RenderError};
pub use table::{ColumnRole, DataColumn, DataTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineCode {
    UnknownTable,
    UnknownColumn,
    MissingGroupBy,
    TypeMismatch,
    BadBin,
    /// Reserved: an empty result is a legal, empty table.
    EmptyResult,
    ArityViolation,
    NonNumericAggregate,
    BadBinColumn,
    DuplicateAlias,
}

impl EngineCode {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineCode::UnknownTable => "UnknownTable",
            EngineCode::UnknownColumn => "UnknownColumn",
            EngineCode::MissingGroupBy => "MissingGroupBy",
            EngineCode::TypeMismatch => "TypeMismatch",
            EngineCode::BadBin => "BadBin",
            EngineCode::EmptyResult => "EmptyResult",
            EngineCode::ArityViolation => "ArityViolation",
            EngineCode::NonNumericAggregate => "NonNumericAggregate",
            EngineCode::BadBinColumn => "BadBinColumn",
            EngineCode::DuplicateAlias => "DuplicateAlias",
        }
    }
}

impl From<SemanticCode> for EngineCode {
    fn from(code: SemanticCode) -> Self {
        match code {
            SemanticCode::UnknownTable => EngineCode::UnknownTable,
            SemanticCode::UnknownColumn => EngineCode::UnknownColumn,
            SemanticCode::ArityViolation => EngineCode::ArityViolation,
            SemanticCode::NonNumericAggregate => EngineCode::NonNumericAggregate,
            SemanticCode::BadBinColumn => EngineCode::BadBinColumn,
            SemanticCode::MissingGroupBy => EngineCode::MissingGroupBy,
            SemanticCode::DuplicateAlias => EngineCode::DuplicateAlias,
        }
    }
}

impl fmt::Display for EngineCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EngineCode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Rendered as `<CODE>: <message>`, identical to [`SemanticError`] for the
/// codes both share.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineError {
    pub code: EngineCode,
    pub message: String,
}

impl EngineError {
    pub fn new(code: EngineCode, message: impl AsRef<str>) -> Self {
        EngineError {
            code,
            message: vql::single_line(message.as_ref()),
        }
    }
}

impl From<SemanticError> for EngineError {
    fn from(e: SemanticError) -> Self {
        EngineError {
            code: e.code.into(),
            message: e.message,
        }
    }
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for EngineError {}

/// Result table plus its chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Translation {
    pub table: DataTable,
    pub spec: ChartSpec,
}

/// Validates, executes, bins and builds the chart for `q`.
///
/// Returns either both outputs or the first error; never a partial result.
pub fn translate(q: &VqlQuery, catalog: &DatabaseCatalog) -> Result<Translation, EngineError> {
    if let Some(first) = vql::validate_vql(q, catalog).into_iter().next() {
        return Err(first.into());
    }
    let table = match &q.bin {
        None => execute_relational(q, catalog)?,
        Some(bin) => {
            // re-summing per-bucket values is only sound for COUNT and SUM;
            // other aggregates are computed over the buckets directly
            let bucket_first = matches!(
                q.select.get(1),
                Some(SelectItem::Aggregate { func, distinct, .. })
                    if *distinct || !matches!(func, vql::AggFunc::Count | vql::AggFunc::Sum)
            );
            let raw = if bucket_first {
                exec::execute_bucketed(q, catalog, bin.interval)?
            } else {
                execute_relational(q, catalog)?
            };
            let binned = apply_binning(&raw, bin, q.vis)?;
            match exec::order_spec(q, catalog)? {
                Some(order) => exec::sort_binned(binned, order, bin.interval),
                None => binned,
            }
        }
    };
    let spec = build_chart_spec(q, &table);
    Ok(Translation { table, spec })
}
