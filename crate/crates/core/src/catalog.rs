//! CSV database catalogs.
//!
//! A catalog is one directory of CSV files, one table per file. Column types
//! are inferred on load and every column keeps up to six value examples,
//! which feed the schema description embedded in the agent prompts.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::{is_null_token, parse_date, parse_decimal, parse_int, Value};

/// Number of value examples kept per column.
pub const EXAMPLE_COUNT: usize = 6;

/// Optional file inside a database directory listing table stems in display
/// order, one per line. Tables it does not mention follow alphabetically.
pub const TABLE_ORDER_FILE: &str = "tables.order";

const DATE_SHARE: f64 = 0.9;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("no CSV files found in {0}")]
    EmptyDatabase(PathBuf),
    #[error("malformed CSV {file} at line {line}: {reason}")]
    MalformedCsv {
        file: String,
        line: u64,
        reason: String,
    },
    #[error("duplicate table name {0}")]
    DuplicateTable(String),
    #[error("duplicate column {column} in table {table}")]
    DuplicateColumn { table: String, column: String },
    #[error("filter names unknown entry {0}")]
    UnknownFilterEntry(String),
    #[error("filter retains no tables")]
    EmptyFilter,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnType {
    Id,
    Number,
    Text,
    Date,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnDef {
    pub name: String,
    pub inferred_type: ColumnType,
    /// First distinct non-null raw values, in row order.
    pub examples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableDef {
    name: String,
    columns: Vec<ColumnDef>,
    rows: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseCatalog {
    db_id: String,
    tables: Vec<TableDef>,
}

/// Query-relevant subset of a schema: table name to column names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FilteredSchema {
    pub entries: IndexMap<String, Vec<String>>,
}

/// An entry of a filter that did not resolve and was dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FilterWarning {
    UnknownTable(String),
    UnknownColumn { table: String, column: String },
}

impl std::fmt::Display for FilterWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterWarning::UnknownTable(t) => write!(f, "dropped unknown table {t}"),
            FilterWarning::UnknownColumn { table, column } => {
                write!(f, "dropped unknown column {table}.{column}")
            }
        }
    }
}

/// Classifies a column from its name and raw cell values.
///
/// Rule order: Id, Date, Number, Text. Null cells are ignored; a column
/// without any non-null cell is a Number with no examples.
pub fn infer_column_type(table: &str, name: &str, values: &[&str]) -> ColumnType {
    let present: Vec<&str> = values
        .iter()
        .copied()
        .filter(|v| !is_null_token(v))
        .map(str::trim)
        .collect();
    if is_id_name(table, name) {
        return ColumnType::Id;
    }
    if present.is_empty() {
        return ColumnType::Number;
    }
    if all_distinct_integers(&present) {
        return ColumnType::Id;
    }
    let dates = present.iter().filter(|v| parse_date(v).is_some()).count();
    if dates as f64 >= DATE_SHARE * present.len() as f64 {
        return ColumnType::Date;
    }
    if present.iter().all(|v| parse_decimal(v).is_some()) {
        return ColumnType::Number;
    }
    ColumnType::Text
}

fn is_id_name(table: &str, name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    lower == "id" || lower.ends_with("_id") || lower == format!("{}id", table.to_ascii_lowercase())
}

fn all_distinct_integers(values: &[&str]) -> bool {
    let mut seen = HashSet::new();
    values
        .iter()
        .all(|v| parse_int(v).is_some_and(|i| seen.insert(i)))
}

/// First `k` distinct non-null values in row order.
pub fn value_examples(values: &[&str], k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for v in values {
        if out.len() == k {
            break;
        }
        if is_null_token(v) {
            continue;
        }
        let v = v.trim();
        if !out.iter().any(|e| e == v) {
            out.push(v.to_string());
        }
    }
    out
}

fn convert_cell(ty: ColumnType, raw: &str) -> Value {
    if is_null_token(raw) {
        return Value::Null;
    }
    let t = raw.trim();
    match ty {
        ColumnType::Id => parse_int(t)
            .map(Value::Int)
            .unwrap_or_else(|| Value::Text(raw.to_string())),
        ColumnType::Number => match parse_int(t) {
            Some(i) => Value::Int(i),
            None => parse_decimal(t).map(Value::Float).unwrap_or(Value::Null),
        },
        ColumnType::Date => parse_date(t).map(Value::Date).unwrap_or(Value::Null),
        ColumnType::Text => Value::Text(raw.to_string()),
    }
}

impl TableDef {
    /// Builds a table from raw CSV-like cells, inferring column types.
    pub fn from_raw(
        name: impl Into<String>,
        headers: Vec<String>,
        raw_rows: Vec<Vec<String>>,
    ) -> Result<Self, CatalogError> {
        let name = name.into();
        let mut seen = HashSet::new();
        for h in &headers {
            if !seen.insert(h.to_lowercase()) {
                return Err(CatalogError::DuplicateColumn {
                    table: name.clone(),
                    column: h.clone(),
                });
            }
        }
        for (i, row) in raw_rows.iter().enumerate() {
            if row.len() != headers.len() {
                return Err(CatalogError::MalformedCsv {
                    file: name.clone(),
                    line: i as u64 + 2,
                    reason: format!("expected {} fields, found {}", headers.len(), row.len()),
                });
            }
        }
        let mut columns = Vec::with_capacity(headers.len());
        for (ci, header) in headers.into_iter().enumerate() {
            let cells: Vec<&str> = raw_rows.iter().map(|r| r[ci].as_str()).collect();
            let inferred_type = infer_column_type(&name, &header, &cells);
            columns.push(ColumnDef {
                name: header,
                inferred_type,
                examples: value_examples(&cells, EXAMPLE_COUNT),
            });
        }
        let rows = raw_rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(&columns)
                    .map(|(cell, col)| convert_cell(col.inferred_type, cell))
                    .collect()
            })
            .collect();
        Ok(TableDef {
            name,
            columns,
            rows,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    /// Case-insensitive column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.column_index(name).map(|i| &self.columns[i])
    }
}

impl DatabaseCatalog {
    pub fn new(db_id: impl Into<String>, tables: Vec<TableDef>) -> Result<Self, CatalogError> {
        let mut seen = HashSet::new();
        for t in &tables {
            if !seen.insert(t.name.to_lowercase()) {
                return Err(CatalogError::DuplicateTable(t.name.clone()));
            }
        }
        Ok(DatabaseCatalog {
            db_id: db_id.into(),
            tables,
        })
    }

    pub fn db_id(&self) -> &str {
        &self.db_id
    }

    pub fn tables(&self) -> &[TableDef] {
        &self.tables
    }

    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

impl FilteredSchema {
    pub fn new(entries: IndexMap<String, Vec<String>>) -> Self {
        FilteredSchema { entries }
    }

    /// The identity filter: every table and column of `catalog`.
    pub fn full(catalog: &DatabaseCatalog) -> Self {
        FilteredSchema {
            entries: catalog
                .tables
                .iter()
                .map(|t| {
                    (
                        t.name.clone(),
                        t.columns.iter().map(|c| c.name.clone()).collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn table_count(&self) -> usize {
        self.entries.len()
    }

    fn lookup(&self, table: &str) -> Option<&Vec<String>> {
        self.entries
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(table))
            .map(|(_, v)| v)
    }

    fn keeps(&self, table: &str, column: &str) -> bool {
        self.lookup(table)
            .is_some_and(|cols| cols.iter().any(|c| c.eq_ignore_ascii_case(column)))
    }
}

/// Loads every `*.csv` in `dir` as one table named after the file stem.
pub fn load_database(dir: &Path) -> Result<DatabaseCatalog, CatalogError> {
    let io_err = |source| CatalogError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|ext| ext.eq_ignore_ascii_case("csv"))
        })
        .collect();
    if files.is_empty() {
        return Err(CatalogError::EmptyDatabase(dir.to_path_buf()));
    }
    files.sort();
    let order = read_table_order(dir)?;
    files.sort_by_key(|p| {
        let stem = file_stem(p);
        order.iter().position(|o| o == &stem).unwrap_or(order.len())
    });

    let db_id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tables = files
        .iter()
        .map(|p| load_table(p))
        .collect::<Result<Vec<_>, _>>()?;
    DatabaseCatalog::new(db_id, tables)
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn read_table_order(dir: &Path) -> Result<Vec<String>, CatalogError> {
    let path = dir.join(TABLE_ORDER_FILE);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(&path).map_err(|source| CatalogError::Io { path, source })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn load_table(path: &Path) -> Result<TableDef, CatalogError> {
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let malformed = |line: u64, reason: String| CatalogError::MalformedCsv {
        file: file.clone(),
        line,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| malformed(1, e.to_string()))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .map(|h| h.trim_start_matches('\u{feff}').trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        rows.push(rec.iter().map(String::from).collect());
    }
    TableDef::from_raw(file_stem(path), headers, rows)
}

fn annotation(col: &ColumnDef) -> String {
    match col.inferred_type {
        ColumnType::Id => "And This is a id type column".to_string(),
        ColumnType::Number if col.examples.is_empty() => {
            "And this is a number type column".to_string()
        }
        ColumnType::Number => format!("Value examples: [{}].", col.examples.join(", ")),
        ColumnType::Text | ColumnType::Date => {
            let quoted: Vec<String> = col.examples.iter().map(|e| format!("'{e}'")).collect();
            format!("Value examples: [{}].", quoted.join(", "))
        }
    }
}

fn render_table(out: &mut String, table: &TableDef, keep: &dyn Fn(&ColumnDef) -> bool) {
    let cols: Vec<&ColumnDef> = table.columns.iter().filter(|c| keep(c)).collect();
    if !out.is_empty() {
        out.push('\n');
    }
    let _ = write!(out, "# Table: {}\n[\n", table.name);
    for (i, col) in cols.iter().enumerate() {
        let sep = if i + 1 == cols.len() { "" } else { "," };
        let _ = writeln!(out, "  ({}, {}){}", col.name, annotation(col), sep);
    }
    out.push(']');
}

/// Renders the schema description used by the prompts, optionally restricted
/// to the tables and columns of `filter`.
pub fn render_description(
    catalog: &DatabaseCatalog,
    filter: Option<&FilteredSchema>,
) -> Result<String, CatalogError> {
    let mut out = String::new();
    match filter {
        None => {
            for table in &catalog.tables {
                render_table(&mut out, table, &|_| true);
            }
        }
        Some(f) => {
            for (tname, cols) in &f.entries {
                let table = catalog
                    .table(tname)
                    .ok_or_else(|| CatalogError::UnknownFilterEntry(tname.clone()))?;
                if let Some(c) = cols.iter().find(|c| table.column(c).is_none()) {
                    return Err(CatalogError::UnknownFilterEntry(format!("{tname}.{c}")));
                }
            }
            for table in &catalog.tables {
                let Some(cols) = f.lookup(&table.name) else {
                    continue;
                };
                if cols.is_empty() {
                    continue;
                }
                render_table(&mut out, table, &|c| f.keeps(&table.name, &c.name));
            }
        }
    }
    Ok(out)
}

/// Projects `catalog` onto `filter`. Unknown tables and columns are dropped
/// and reported; tables left without columns disappear.
pub fn apply_filter(
    catalog: &DatabaseCatalog,
    filter: &FilteredSchema,
) -> Result<(DatabaseCatalog, Vec<FilterWarning>), CatalogError> {
    let mut warnings = Vec::new();
    for (tname, cols) in &filter.entries {
        match catalog.table(tname) {
            None => warnings.push(FilterWarning::UnknownTable(tname.clone())),
            Some(t) => {
                for c in cols {
                    if t.column(c).is_none() {
                        warnings.push(FilterWarning::UnknownColumn {
                            table: tname.clone(),
                            column: c.clone(),
                        });
                    }
                }
            }
        }
    }
    let mut tables = Vec::new();
    for table in &catalog.tables {
        if filter.lookup(&table.name).is_none() {
            continue;
        }
        let keep: Vec<usize> = (0..table.columns.len())
            .filter(|&i| filter.keeps(&table.name, &table.columns[i].name))
            .collect();
        if keep.is_empty() {
            continue;
        }
        tables.push(TableDef {
            name: table.name.clone(),
            columns: keep.iter().map(|&i| table.columns[i].clone()).collect(),
            rows: table
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        });
    }
    if tables.is_empty() {
        return Err(CatalogError::EmptyFilter);
    }
    Ok((
        DatabaseCatalog {
            db_id: catalog.db_id.clone(),
            tables,
        },
        warnings,
    ))
}
