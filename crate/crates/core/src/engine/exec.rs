use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::catalog::{ColumnType, DatabaseCatalog};
use crate::value::{parse_date, parse_decimal, Value, ValueKey};
use crate::vql::resolve::{ResolvedColumn, Scope};
use crate::vql::{
    AggFunc, BinInterval, CompareOp, Literal, Predicate, SelectItem, SortDirection, VqlQuery,
};

use super::bin::{bucket_value, canonical_rank};
use super::{ColumnRole, DataColumn, DataTable, EngineCode, EngineError};

/// Runs the relational core of `q`: join, filter, group, aggregate, sort.
///
/// Expects a query that passed validation; resolution failures still come
/// back as errors rather than panics.
pub fn execute_relational(
    q: &VqlQuery,
    catalog: &DatabaseCatalog,
) -> Result<DataTable, EngineError> {
    run(q, catalog, None)
}

/// Like [`execute_relational`] but maps the x column to its bin bucket
/// before grouping.
pub(crate) fn execute_bucketed(
    q: &VqlQuery,
    catalog: &DatabaseCatalog,
    interval: BinInterval,
) -> Result<DataTable, EngineError> {
    run(q, catalog, Some(interval))
}

/// Resolved ORDER BY: select index and direction.
pub(crate) fn order_spec(
    q: &VqlQuery,
    catalog: &DatabaseCatalog,
) -> Result<Option<(usize, SortDirection)>, EngineError> {
    let Some(order) = &q.order_by else {
        return Ok(None);
    };
    let scope = Scope::build(q, catalog).map_err(first_error)?;
    match scope.order_index(q) {
        Some(Ok(i)) => Ok(Some((i, order.direction))),
        Some(Err(e)) => Err(e.into()),
        None => Ok(None),
    }
}

fn first_error(errs: Vec<crate::vql::SemanticError>) -> EngineError {
    errs.into_iter()
        .next()
        .map(EngineError::from)
        .unwrap_or_else(|| EngineError::new(EngineCode::UnknownTable, "no tables bound"))
}

fn run(
    q: &VqlQuery,
    catalog: &DatabaseCatalog,
    bucket: Option<BinInterval>,
) -> Result<DataTable, EngineError> {
    let scope = Scope::build(q, catalog).map_err(first_error)?;
    let resolve = |c| scope.resolve(c).map_err(EngineError::from);

    let select: Vec<ResolvedColumn> = q
        .select
        .iter()
        .map(|s| resolve(s.column_ref()))
        .collect::<Result<_, _>>()?;
    let group: Vec<ResolvedColumn> = q.group_by.iter().map(resolve).collect::<Result<_, _>>()?;
    let joins: Vec<(ResolvedColumn, ResolvedColumn)> = q
        .joins
        .iter()
        .map(|j| Ok((resolve(&j.on_left)?, resolve(&j.on_right)?)))
        .collect::<Result<_, EngineError>>()?;
    let filter = q
        .where_clause
        .as_ref()
        .map(|p| compile(p, &scope))
        .transpose()?;
    let order = match (&q.order_by, scope.order_index(q)) {
        (Some(o), Some(idx)) => Some((idx?, o.direction)),
        _ => None,
    };

    let mut rows = join_rows(&scope, &joins);
    if let Some(f) = &filter {
        rows.retain(|r| f.eval(r));
    }
    if let Some(interval) = bucket {
        let x = select[0].slot;
        for r in rows.iter_mut() {
            r[x] = bucket_value(&r[x], interval)?.unwrap_or(Value::Null);
        }
    }

    // GROUP BY without aggregates still collapses each group to one row
    let mut out = if q.has_aggregate() || !group.is_empty() {
        aggregate(q, &select, &group, &rows)?
    } else {
        rows.iter()
            .map(|r| select.iter().map(|c| r[c.slot].clone()).collect())
            .collect()
    };
    sort_rows(&mut out, order, None);

    Ok(DataTable {
        columns: output_columns(q),
        rows: out,
    })
}

pub(crate) fn output_columns(q: &VqlQuery) -> Vec<DataColumn> {
    q.select
        .iter()
        .enumerate()
        .map(|(i, s)| DataColumn {
            name: s.output_name(),
            role: match i {
                0 => ColumnRole::X,
                1 => ColumnRole::Y,
                2 if q.vis.is_complex() => ColumnRole::Group,
                _ => ColumnRole::Plain,
            },
        })
        .collect()
}

/// Inner equi-joins, left to right.
fn join_rows(scope: &Scope<'_>, joins: &[(ResolvedColumn, ResolvedColumn)]) -> Vec<Vec<Value>> {
    let width = scope.width();
    let base = &scope.bindings[0];
    let mut rows: Vec<Vec<Value>> = base
        .table
        .rows()
        .iter()
        .map(|r| {
            let mut full = vec![Value::Null; width];
            full[..r.len()].clone_from_slice(r);
            full
        })
        .collect();

    for (ji, (left, right)) in joins.iter().enumerate() {
        let new_binding = ji + 1;
        let b = &scope.bindings[new_binding];
        let n = b.table.rows().len();
        let width = b.table.columns().len();
        let extend = |row: &Vec<Value>, i: usize| {
            let mut joined = row.clone();
            joined[b.offset..b.offset + width].clone_from_slice(&b.table.rows()[i]);
            joined
        };
        // the hash path needs exactly one side on the newly joined table
        let oriented = match (left.binding == new_binding, right.binding == new_binding) {
            (true, false) => Some((right, left)),
            (false, true) => Some((left, right)),
            _ => None,
        };
        let mut next = Vec::new();
        match oriented {
            Some((probe, build)) => {
                let mut index: HashMap<ValueKey, Vec<usize>> = HashMap::new();
                for (i, r) in b.table.rows().iter().enumerate() {
                    let v = &r[build.column];
                    if !v.is_null() {
                        index.entry(v.key()).or_default().push(i);
                    }
                }
                for row in &rows {
                    if row[probe.slot].is_null() {
                        continue;
                    }
                    for &i in index.get(&row[probe.slot].key()).into_iter().flatten() {
                        next.push(extend(row, i));
                    }
                }
            }
            None => {
                for row in &rows {
                    for i in 0..n {
                        let joined = extend(row, i);
                        if joined[left.slot].sql_eq(&joined[right.slot]) {
                            next.push(joined);
                        }
                    }
                }
            }
        }
        rows = next;
    }
    rows
}

#[derive(Debug)]
enum Compiled {
    Compare {
        slot: usize,
        op: CompareOp,
        value: Value,
    },
    NotNull(usize),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
}

fn literal_value(l: &Literal) -> Value {
    match l {
        Literal::Str(s) => Value::Text(s.clone()),
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Date(d) => Value::Date(*d),
    }
}

fn compile(p: &Predicate, scope: &Scope<'_>) -> Result<Compiled, EngineError> {
    Ok(match p {
        Predicate::Compare { column, op, value } => {
            let r = scope.resolve(column)?;
            let mismatch = |what: &str| {
                EngineError::new(
                    EngineCode::TypeMismatch,
                    format!("cannot compare {what} column {column} with {value}"),
                )
            };
            let value = match (*op, r.ty, value) {
                (CompareOp::Like, _, Literal::Str(s)) => Value::Text(s.clone()),
                (CompareOp::Like, _, _) => {
                    return Err(EngineError::new(
                        EngineCode::TypeMismatch,
                        format!("LIKE on {column} needs a string pattern"),
                    ))
                }
                (_, ColumnType::Number, Literal::Str(s)) => match parse_decimal(s) {
                    Some(f) => Value::Float(f),
                    None => return Err(mismatch("number")),
                },
                (_, ColumnType::Number, Literal::Date(_)) => return Err(mismatch("number")),
                (_, ColumnType::Date, Literal::Str(s)) => match parse_date(s) {
                    Some(d) => Value::Date(d),
                    None => return Err(mismatch("date")),
                },
                (_, ColumnType::Date, Literal::Int(_) | Literal::Float(_)) => {
                    return Err(mismatch("date"))
                }
                (_, _, l) => literal_value(l),
            };
            Compiled::Compare {
                slot: r.slot,
                op: *op,
                value,
            }
        }
        Predicate::IsNotNull(c) => Compiled::NotNull(scope.resolve(c)?.slot),
        Predicate::And(l, r) => {
            Compiled::And(Box::new(compile(l, scope)?), Box::new(compile(r, scope)?))
        }
        Predicate::Or(l, r) => {
            Compiled::Or(Box::new(compile(l, scope)?), Box::new(compile(r, scope)?))
        }
    })
}

impl Compiled {
    fn eval(&self, row: &[Value]) -> bool {
        match self {
            Compiled::Compare { slot, op, value } => compare(&row[*slot], *op, value),
            Compiled::NotNull(slot) => !row[*slot].is_null(),
            Compiled::And(l, r) => l.eval(row) && r.eval(row),
            Compiled::Or(l, r) => l.eval(row) || r.eval(row),
        }
    }
}

/// Cell-vs-literal comparison. Nulls and incomparable pairs are false.
pub(crate) fn compare(cell: &Value, op: CompareOp, lit: &Value) -> bool {
    if op == CompareOp::Like {
        return match (cell, lit) {
            (Value::Null, _) => false,
            (c, Value::Text(p)) => like_match(&c.to_string(), p),
            _ => false,
        };
    }
    let Some(ord) = compare_values(cell, lit) else {
        return false;
    };
    match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::NotEq => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::LtEq => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::GtEq => ord != Ordering::Less,
        CompareOp::Like => unreachable!(),
    }
}

fn compare_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Null, _) | (_, Value::Null) => None,
        (a, b) if a.is_numeric() && b.is_numeric() => Some(a.total_cmp(b)),
        (Value::Text(x), Value::Text(y)) => Some(x.cmp(y)),
        (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        (Value::Date(x), Value::Text(y)) => parse_date(y).map(|d| x.cmp(&d)),
        (Value::Text(x), Value::Date(y)) => parse_date(x).map(|d| d.cmp(y)),
        (n, Value::Text(y)) if n.is_numeric() => {
            parse_decimal(y).map(|f| n.as_f64().unwrap().total_cmp(&f))
        }
        (Value::Text(x), n) if n.is_numeric() => {
            parse_decimal(x).map(|f| f.total_cmp(&n.as_f64().unwrap()))
        }
        _ => None,
    }
}

/// `%` matches any run, `_` one character. Case-sensitive.
pub fn like_match(text: &str, pattern: &str) -> bool {
    let t: Vec<char> = text.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    let (mut ti, mut pi) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '_' || (p[pi] != '%' && p[pi] == t[ti])) {
            ti += 1;
            pi += 1;
        } else if pi < p.len() && p[pi] == '%' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '%')
}

enum Acc {
    Count(usize, Option<HashSet<ValueKey>>),
    Sum {
        int: Option<i64>,
        float: f64,
        any: bool,
        is_float: bool,
        distinct: Option<HashSet<ValueKey>>,
    },
    Avg(f64, usize, Option<HashSet<ValueKey>>),
    Min(Option<Value>),
    Max(Option<Value>),
}

impl Acc {
    fn new(func: AggFunc, distinct: bool) -> Self {
        let set = distinct.then(HashSet::new);
        match func {
            AggFunc::Count => Acc::Count(0, set),
            AggFunc::Sum => Acc::Sum {
                int: Some(0),
                float: 0.0,
                any: false,
                is_float: false,
                distinct: set,
            },
            AggFunc::Avg => Acc::Avg(0.0, 0, set),
            AggFunc::Min => Acc::Min(None),
            AggFunc::Max => Acc::Max(None),
        }
    }

    fn push(&mut self, v: &Value, what: &str) -> Result<(), EngineError> {
        if v.is_null() {
            return Ok(());
        }
        let fresh = |set: &mut Option<HashSet<ValueKey>>| match set {
            Some(s) => s.insert(v.key()),
            None => true,
        };
        match self {
            Acc::Count(n, set) => {
                if fresh(set) {
                    *n += 1;
                }
            }
            Acc::Sum {
                int,
                float,
                any,
                is_float,
                distinct,
            } => {
                if !v.is_numeric() {
                    return Err(non_numeric(what, v));
                }
                if fresh(distinct) {
                    *any = true;
                    *float += v.as_f64().unwrap();
                    match v {
                        Value::Int(i) => *int = int.and_then(|acc| acc.checked_add(*i)),
                        _ => *is_float = true,
                    }
                }
            }
            Acc::Avg(sum, n, set) => {
                if !v.is_numeric() {
                    return Err(non_numeric(what, v));
                }
                if fresh(set) {
                    *sum += v.as_f64().unwrap();
                    *n += 1;
                }
            }
            Acc::Min(m) => {
                if m.as_ref()
                    .is_none_or(|cur| v.total_cmp(cur) == Ordering::Less)
                {
                    *m = Some(v.clone());
                }
            }
            Acc::Max(m) => {
                if m.as_ref()
                    .is_none_or(|cur| v.total_cmp(cur) == Ordering::Greater)
                {
                    *m = Some(v.clone());
                }
            }
        }
        Ok(())
    }

    fn finish(self) -> Value {
        match self {
            Acc::Count(n, _) => Value::Int(n as i64),
            Acc::Sum {
                int,
                float,
                any,
                is_float,
                ..
            } => match (any, is_float, int) {
                (false, _, _) => Value::Null,
                (true, false, Some(i)) => Value::Int(i),
                _ => Value::Float(float),
            },
            Acc::Avg(_, 0, _) => Value::Null,
            Acc::Avg(sum, n, _) => Value::Float(sum / n as f64),
            Acc::Min(m) | Acc::Max(m) => m.unwrap_or(Value::Null),
        }
    }
}

fn non_numeric(what: &str, v: &Value) -> EngineError {
    EngineError::new(
        EngineCode::TypeMismatch,
        format!("{what} encountered non-numeric value '{v}'"),
    )
}

/// Groups by GROUP BY columns plus every plain select column. With no
/// keys at all the whole input is one group, so the result has one row.
fn aggregate(
    q: &VqlQuery,
    select: &[ResolvedColumn],
    group: &[ResolvedColumn],
    rows: &[Vec<Value>],
) -> Result<Vec<Vec<Value>>, EngineError> {
    let mut key_slots: Vec<usize> = group.iter().map(|c| c.slot).collect();
    for (item, c) in q.select.iter().zip(select) {
        if !item.is_aggregate() && !key_slots.contains(&c.slot) {
            key_slots.push(c.slot);
        }
    }

    let mut groups: IndexMap<Vec<ValueKey>, Vec<usize>> = IndexMap::new();
    for (ri, r) in rows.iter().enumerate() {
        let key: Vec<ValueKey> = key_slots.iter().map(|&s| r[s].key()).collect();
        groups.entry(key).or_default().push(ri);
    }
    if key_slots.is_empty() && groups.is_empty() {
        let row = q
            .select
            .iter()
            .map(|item| match item {
                SelectItem::Aggregate { func, distinct, .. } => Acc::new(*func, *distinct).finish(),
                SelectItem::Column(_) => Value::Null,
            })
            .collect();
        return Ok(vec![row]);
    }

    let mut out = Vec::with_capacity(groups.len());
    for members in groups.values() {
        let rep = &rows[members[0]];
        let mut row = Vec::with_capacity(q.select.len());
        for (item, c) in q.select.iter().zip(select) {
            match item {
                SelectItem::Column(_) => row.push(rep[c.slot].clone()),
                SelectItem::Aggregate { func, distinct, .. } => {
                    let mut acc = Acc::new(*func, *distinct);
                    let what = item.output_name();
                    for &ri in members {
                        acc.push(&rows[ri][c.slot], &what)?;
                    }
                    row.push(acc.finish());
                }
            }
        }
        out.push(row);
    }
    Ok(out)
}

/// Stable sort: the ORDER BY column first (if any), then every column
/// ascending left to right. `binned` ranks weekday/month names canonically
/// on the x column.
pub(crate) fn sort_rows(
    rows: &mut [Vec<Value>],
    order: Option<(usize, SortDirection)>,
    binned: Option<BinInterval>,
) {
    let cmp_col = |i: usize, a: &Value, b: &Value| -> Ordering {
        if i == 0 {
            if let Some(interval) = binned {
                if let (Some(x), Some(y)) =
                    (canonical_rank(a, interval), canonical_rank(b, interval))
                {
                    return x.cmp(&y);
                }
            }
        }
        a.total_cmp(b)
    };
    rows.sort_by(|a, b| {
        if let Some((idx, dir)) = order {
            let o = cmp_col(idx, &a[idx], &b[idx]);
            let o = if dir == SortDirection::Desc {
                o.reverse()
            } else {
                o
            };
            if o != Ordering::Equal {
                return o;
            }
        }
        (0..a.len())
            .filter(|&i| order.is_none_or(|(idx, _)| idx != i))
            .map(|i| cmp_col(i, &a[i], &b[i]))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
}

/// Re-applies ORDER BY after binning. Rows tied on the key keep the
/// canonical bin order.
pub(crate) fn sort_binned(
    mut t: DataTable,
    (idx, dir): (usize, SortDirection),
    interval: BinInterval,
) -> DataTable {
    let cmp =
        |a: &Value, b: &Value| match (canonical_rank(a, interval), canonical_rank(b, interval)) {
            (Some(x), Some(y)) if idx == 0 => x.cmp(&y),
            _ => a.total_cmp(b),
        };
    t.rows.sort_by(|a, b| {
        let o = cmp(&a[idx], &b[idx]);
        if dir == SortDirection::Desc {
            o.reverse()
        } else {
            o
        }
    });
    t
}
