//! Name resolution shared by the validator and the executor.

use crate::catalog::{ColumnType, DatabaseCatalog, TableDef};

use super::ast::*;
use super::{SemanticCode, SemanticError};

#[derive(Debug)]
pub struct Binding<'a> {
    /// Alias, or the table name when unaliased.
    pub name: String,
    pub table: &'a TableDef,
    /// Offset of this table's first column in a joined row.
    pub offset: usize,
}

/// A column resolved to its position in the joined row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResolvedColumn {
    pub binding: usize,
    pub column: usize,
    pub slot: usize,
    pub ty: ColumnType,
}

#[derive(Debug)]
pub struct Scope<'a> {
    pub bindings: Vec<Binding<'a>>,
}

impl<'a> Scope<'a> {
    /// Binds FROM and JOIN tables. Reports unknown tables and duplicate
    /// binding names.
    pub fn build(q: &VqlQuery, catalog: &'a DatabaseCatalog) -> Result<Self, Vec<SemanticError>> {
        let mut errors = Vec::new();
        let mut bindings: Vec<Binding<'a>> = Vec::new();
        let mut offset = 0;
        let refs = std::iter::once(&q.from).chain(q.joins.iter().map(|j| &j.table));
        for tref in refs {
            let Some(table) = catalog.table(&tref.name) else {
                errors.push(SemanticError::new(
                    SemanticCode::UnknownTable,
                    format!(
                        "table '{}' does not exist; available tables: {}",
                        tref.name,
                        table_list(catalog)
                    ),
                ));
                continue;
            };
            let name = tref.binding_name().to_string();
            if bindings.iter().any(|b| b.name.eq_ignore_ascii_case(&name)) {
                errors.push(SemanticError::new(
                    SemanticCode::DuplicateAlias,
                    format!("table alias '{name}' is used more than once"),
                ));
                continue;
            }
            let width = table.columns().len();
            bindings.push(Binding {
                name,
                table,
                offset,
            });
            offset += width;
        }
        if errors.is_empty() {
            Ok(Scope { bindings })
        } else {
            Err(errors)
        }
    }

    pub fn width(&self) -> usize {
        self.bindings
            .last()
            .map(|b| b.offset + b.table.columns().len())
            .unwrap_or(0)
    }

    pub fn resolve(&self, c: &ColumnRef) -> Result<ResolvedColumn, SemanticError> {
        if let Some(qualifier) = &c.table {
            let Some((bi, b)) = self
                .bindings
                .iter()
                .enumerate()
                .find(|(_, b)| b.name.eq_ignore_ascii_case(qualifier))
            else {
                return Err(SemanticError::new(
                    SemanticCode::UnknownColumn,
                    format!(
                        "column '{c}' uses unknown table or alias '{qualifier}'; in scope: {}",
                        self.binding_list()
                    ),
                ));
            };
            return match b.table.column_index(&c.column) {
                Some(ci) => Ok(self.resolved(bi, ci)),
                None => Err(SemanticError::new(
                    SemanticCode::UnknownColumn,
                    format!(
                        "column '{}' does not exist in table {}",
                        c.column,
                        b.table.name()
                    ),
                )),
            };
        }
        let hits: Vec<(usize, usize)> = self
            .bindings
            .iter()
            .enumerate()
            .filter_map(|(bi, b)| b.table.column_index(&c.column).map(|ci| (bi, ci)))
            .collect();
        match hits.as_slice() {
            [(bi, ci)] => Ok(self.resolved(*bi, *ci)),
            [] => Err(SemanticError::new(
                SemanticCode::UnknownColumn,
                format!(
                    "column '{}' does not exist in {}",
                    c.column,
                    self.binding_list()
                ),
            )),
            _ => Err(SemanticError::new(
                SemanticCode::UnknownColumn,
                format!(
                    "column '{}' is ambiguous; qualify it with one of {}",
                    c.column,
                    self.binding_list()
                ),
            )),
        }
    }

    fn resolved(&self, binding: usize, column: usize) -> ResolvedColumn {
        let b = &self.bindings[binding];
        ResolvedColumn {
            binding,
            column,
            slot: b.offset + column,
            ty: b.table.columns()[column].inferred_type,
        }
    }

    fn binding_list(&self) -> String {
        self.bindings
            .iter()
            .map(|b| {
                if b.name == b.table.name() {
                    b.name.clone()
                } else {
                    format!("{} ({})", b.name, b.table.name())
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Index of the SELECT item an ORDER BY target designates.
    pub fn order_index(&self, q: &VqlQuery) -> Option<Result<usize, SemanticError>> {
        let order = q.order_by.as_ref()?;
        let idx = match &order.target {
            OrderTarget::X => Ok(0),
            OrderTarget::Y if q.select.len() > 1 => Ok(1),
            OrderTarget::Y => Err(SemanticError::new(
                SemanticCode::UnknownColumn,
                "ORDER BY Y needs a second SELECT item".to_string(),
            )),
            OrderTarget::Item(item) => self.match_select_item(q, item),
        };
        Some(idx)
    }

    fn match_select_item(&self, q: &VqlQuery, item: &SelectItem) -> Result<usize, SemanticError> {
        let target = self.resolve(item.column_ref())?;
        q.select
            .iter()
            .position(|s| {
                let same_shape = match (s, item) {
                    (SelectItem::Column(_), SelectItem::Column(_)) => true,
                    (
                        SelectItem::Aggregate {
                            func: f1,
                            distinct: d1,
                            ..
                        },
                        SelectItem::Aggregate {
                            func: f2,
                            distinct: d2,
                            ..
                        },
                    ) => f1 == f2 && d1 == d2,
                    _ => false,
                };
                same_shape
                    && self
                        .resolve(s.column_ref())
                        .is_ok_and(|r| r.slot == target.slot)
            })
            .ok_or_else(|| {
                SemanticError::new(
                    SemanticCode::UnknownColumn,
                    format!("ORDER BY target {item} must be one of the SELECT items"),
                )
            })
    }
}

fn table_list(catalog: &DatabaseCatalog) -> String {
    catalog
        .tables()
        .iter()
        .map(|t| t.name())
        .collect::<Vec<_>>()
        .join(", ")
}
