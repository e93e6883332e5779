use std::collections::HashSet;

use crate::catalog::{ColumnType, DatabaseCatalog};

use super::ast::*;
use super::resolve::{ResolvedColumn, Scope};
use super::{SemanticCode, SemanticError};

/// Checks `q` against `catalog`. An empty result means the query executes.
///
/// Checks run in a fixed order: arity, table binding, column resolution,
/// aggregate argument types, the BIN clause, then grouping.
pub fn validate_vql(q: &VqlQuery, catalog: &DatabaseCatalog) -> Vec<SemanticError> {
    let mut errors = Vec::new();
    if q.select.len() != q.vis.arity() {
        let shape = if q.vis.is_complex() {
            "x, y, group"
        } else {
            "x, y"
        };
        errors.push(SemanticError::new(
            SemanticCode::ArityViolation,
            format!(
                "{} chart requires exactly {} SELECT columns ({shape}), found {}",
                q.vis.keyword(),
                q.vis.arity(),
                q.select.len()
            ),
        ));
    }

    let scope = match Scope::build(q, catalog) {
        Ok(s) => s,
        Err(mut errs) => {
            errors.append(&mut errs);
            return errors;
        }
    };

    let mut unresolved = false;
    let mut resolve = |c: &ColumnRef, errors: &mut Vec<SemanticError>| match scope.resolve(c) {
        Ok(r) => Some(r),
        Err(e) => {
            unresolved = true;
            if !errors.contains(&e) {
                errors.push(e);
            }
            None
        }
    };

    let select: Vec<Option<ResolvedColumn>> = q
        .select
        .iter()
        .map(|s| resolve(s.column_ref(), &mut errors))
        .collect();
    for j in &q.joins {
        resolve(&j.on_left, &mut errors);
        resolve(&j.on_right, &mut errors);
    }
    if let Some(w) = &q.where_clause {
        for c in w.columns() {
            resolve(c, &mut errors);
        }
    }
    let group: Vec<Option<ResolvedColumn>> =
        q.group_by.iter().map(|c| resolve(c, &mut errors)).collect();
    let bin = q.bin.as_ref().map(|b| resolve(&b.column, &mut errors));
    if let Some(OrderBy {
        target: OrderTarget::Item(item),
        ..
    }) = &q.order_by
    {
        resolve(item.column_ref(), &mut errors);
    }
    if unresolved {
        return errors;
    }
    if let Some(Err(e)) = scope.order_index(q) {
        errors.push(e);
    }

    for (item, r) in q.select.iter().zip(&select) {
        if let (
            SelectItem::Aggregate {
                func: func @ (AggFunc::Sum | AggFunc::Avg),
                arg,
                ..
            },
            Some(r),
        ) = (item, r)
        {
            if r.ty != ColumnType::Number {
                errors.push(SemanticError::new(
                    SemanticCode::NonNumericAggregate,
                    format!(
                        "{}({arg}) needs a numeric column, but {} is {}",
                        func.keyword(),
                        arg.column,
                        type_name(r.ty)
                    ),
                ));
            }
        }
    }

    if let (Some(b), Some(Some(r))) = (&q.bin, bin) {
        let type_ok = r.ty == ColumnType::Date
            || (b.interval == BinInterval::Year && r.ty == ColumnType::Number);
        if !type_ok {
            let allowed = if b.interval == BinInterval::Year {
                "a date or number"
            } else {
                "a date"
            };
            errors.push(SemanticError::new(
                SemanticCode::BadBinColumn,
                format!(
                    "BIN {} BY {} needs {allowed} column, but {} is {}",
                    b.column,
                    b.interval.keyword(),
                    b.column.column,
                    type_name(r.ty)
                ),
            ));
        }
        let is_x = matches!(q.select.first(), Some(SelectItem::Column(_)))
            && select.first().copied().flatten().map(|x| x.slot) == Some(r.slot);
        if !is_x {
            errors.push(SemanticError::new(
                SemanticCode::BadBinColumn,
                format!(
                    "BIN column {} must be the first (x-axis) SELECT column",
                    b.column
                ),
            ));
        }
    }

    if q.has_aggregate() {
        let grouped: HashSet<usize> = group.iter().flatten().map(|r| r.slot).collect();
        let binned = bin.flatten().map(|r| r.slot);
        for (item, r) in q.select.iter().zip(&select) {
            let (SelectItem::Column(c), Some(r)) = (item, r) else {
                continue;
            };
            if grouped.contains(&r.slot) || binned == Some(r.slot) {
                continue;
            }
            errors.push(SemanticError::new(
                SemanticCode::MissingGroupBy,
                format!(
                    "missing 'GROUP BY' clause: non-aggregated column {c} must appear in GROUP BY when aggregates are used"
                ),
            ));
        }
    }
    errors
}

fn type_name(ty: ColumnType) -> &'static str {
    match ty {
        ColumnType::Id => "an id column",
        ColumnType::Number => "a number column",
        ColumnType::Text => "a text column",
        ColumnType::Date => "a date column",
    }
}
