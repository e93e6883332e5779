//! Brute-force evaluator for the relational core of VQL: nested loops over
//! the cross product, no hashing, no indexes. Queries must qualify every
//! column with its table alias.

use std::cmp::Ordering;

use vizagent_core::catalog::DatabaseCatalog;
use vizagent_core::value::Value;
use vizagent_core::vql::*;

struct Bound<'a> {
    alias: String,
    columns: Vec<String>,
    rows: &'a [Vec<Value>],
}

type Row<'a> = Vec<&'a [Value]>;

fn lookup<'a>(tables: &[Bound<'_>], row: &Row<'a>, c: &ColumnRef) -> &'a Value {
    let alias = c
        .table
        .as_deref()
        .expect("reference needs qualified columns");
    let t = tables
        .iter()
        .position(|t| t.alias.eq_ignore_ascii_case(alias))
        .unwrap();
    let i = tables[t]
        .columns
        .iter()
        .position(|n| n.eq_ignore_ascii_case(&c.column))
        .unwrap();
    &row[t][i]
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

/// Nulls first, then numbers, dates, text.
pub fn order(a: &Value, b: &Value) -> Ordering {
    fn rank(v: &Value) -> u8 {
        match v {
            Value::Null => 0,
            Value::Int(_) | Value::Float(_) => 1,
            Value::Date(_) => 2,
            Value::Text(_) => 3,
        }
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (Value::Date(x), Value::Date(y)) => x.cmp(y),
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        _ => match (num(a), num(b)) {
            (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
            _ => rank(a).cmp(&rank(b)),
        },
    }
}

fn same(a: &Value, b: &Value) -> bool {
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

fn like(t: &[char], p: &[char]) -> bool {
    match p.split_first() {
        None => t.is_empty(),
        Some(('%', rest)) => (0..=t.len()).any(|k| like(&t[k..], rest)),
        Some((c, rest)) => match t.split_first() {
            Some((h, tail)) if *c == '_' || c == h => like(tail, rest),
            _ => false,
        },
    }
}

fn literal_value(l: &Literal) -> Value {
    match l {
        Literal::Str(s) => Value::Text(s.clone()),
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Date(d) => Value::Date(*d),
    }
}

fn holds(p: &Predicate, tables: &[Bound<'_>], row: &Row<'_>) -> bool {
    match p {
        Predicate::And(l, r) => holds(l, tables, row) && holds(r, tables, row),
        Predicate::Or(l, r) => holds(l, tables, row) || holds(r, tables, row),
        Predicate::IsNotNull(c) => !matches!(lookup(tables, row, c), Value::Null),
        Predicate::Compare { column, op, value } => {
            let cell = lookup(tables, row, column);
            if matches!(cell, Value::Null) {
                return false;
            }
            let lit = literal_value(value);
            if *op == CompareOp::Like {
                let Value::Text(p) = &lit else { return false };
                let text: Vec<char> = cell.to_string().chars().collect();
                return like(&text, &p.chars().collect::<Vec<_>>());
            }
            let ord = order(cell, &lit);
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
    }
}

fn aggregate(func: AggFunc, distinct: bool, values: Vec<&Value>) -> Value {
    let mut vals: Vec<&Value> = values
        .into_iter()
        .filter(|v| !matches!(v, Value::Null))
        .collect();
    if distinct {
        let mut uniq: Vec<&Value> = Vec::new();
        for v in vals {
            if !uniq.iter().any(|u| same(u, v)) {
                uniq.push(v);
            }
        }
        vals = uniq;
    }
    match func {
        AggFunc::Count => Value::Int(vals.len() as i64),
        AggFunc::Sum if vals.is_empty() => Value::Null,
        AggFunc::Sum => {
            if vals.iter().all(|v| matches!(v, Value::Int(_))) {
                Value::Int(vals.iter().map(|v| num(v).unwrap() as i64).sum())
            } else {
                Value::Float(vals.iter().map(|v| num(v).unwrap()).sum())
            }
        }
        AggFunc::Avg if vals.is_empty() => Value::Null,
        AggFunc::Avg => {
            Value::Float(vals.iter().map(|v| num(v).unwrap()).sum::<f64>() / vals.len() as f64)
        }
        AggFunc::Min => vals
            .into_iter()
            .min_by(|a, b| order(a, b))
            .cloned()
            .unwrap_or(Value::Null),
        AggFunc::Max => vals
            .into_iter()
            .max_by(|a, b| order(a, b))
            .cloned()
            .unwrap_or(Value::Null),
    }
}

/// Result rows in select order. Row order is unspecified unless the query
/// has ORDER BY, in which case rows are stably sorted by that key.
pub fn evaluate(q: &VqlQuery, catalog: &DatabaseCatalog) -> Vec<Vec<Value>> {
    let mut refs = vec![&q.from];
    refs.extend(q.joins.iter().map(|j| &j.table));
    let tables: Vec<Bound<'_>> = refs
        .iter()
        .map(|r| {
            let t = catalog.table(&r.name).unwrap();
            Bound {
                alias: r.binding_name().to_string(),
                columns: t.columns().iter().map(|c| c.name.clone()).collect(),
                rows: t.rows(),
            }
        })
        .collect();

    // cross product, then ON and WHERE
    let mut rows: Vec<Row<'_>> = vec![Vec::new()];
    for t in &tables {
        let mut next = Vec::new();
        for r in &rows {
            for row in t.rows {
                let mut r2 = r.clone();
                r2.push(row.as_slice());
                next.push(r2);
            }
        }
        rows = next;
    }
    rows.retain(|r| {
        q.joins.iter().all(|j| {
            let (a, b) = (
                lookup(&tables, r, &j.on_left),
                lookup(&tables, r, &j.on_right),
            );
            !matches!(a, Value::Null) && !matches!(b, Value::Null) && same(a, b)
        })
    });
    if let Some(w) = &q.where_clause {
        rows.retain(|r| holds(w, &tables, r));
    }

    let grouped = q.has_aggregate() || !q.group_by.is_empty();
    let mut out: Vec<Vec<Value>> = if !grouped {
        rows.iter()
            .map(|r| {
                q.select
                    .iter()
                    .map(|s| lookup(&tables, r, s.column_ref()).clone())
                    .collect()
            })
            .collect()
    } else {
        let mut keys: Vec<&ColumnRef> = q.group_by.iter().collect();
        for s in &q.select {
            if let SelectItem::Column(c) = s {
                keys.push(c);
            }
        }
        let mut groups: Vec<(Vec<Value>, Vec<usize>)> = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            let key: Vec<Value> = keys.iter().map(|c| lookup(&tables, r, c).clone()).collect();
            // nulls group together, unlike join equality
            match groups.iter_mut().find(|(k, _)| {
                k.iter().zip(&key).all(|(a, b)| {
                    same(a, b) || (matches!(a, Value::Null) && matches!(b, Value::Null))
                })
            }) {
                Some((_, members)) => members.push(i),
                None => groups.push((key, vec![i])),
            }
        }
        if groups.is_empty()
            && q.group_by.is_empty()
            && q.select.iter().all(SelectItem::is_aggregate)
        {
            groups.push((Vec::new(), Vec::new()));
        }
        groups
            .iter()
            .map(|(_, members)| {
                q.select
                    .iter()
                    .map(|s| match s {
                        SelectItem::Column(c) => lookup(&tables, &rows[members[0]], c).clone(),
                        SelectItem::Aggregate {
                            func,
                            arg,
                            distinct,
                        } => aggregate(
                            *func,
                            *distinct,
                            members
                                .iter()
                                .map(|&m| lookup(&tables, &rows[m], arg))
                                .collect(),
                        ),
                    })
                    .collect()
            })
            .collect()
    };

    if let Some(o) = &q.order_by {
        let idx = order_index(q, o);
        out.sort_by(|a, b| {
            let ord = order(&a[idx], &b[idx]);
            match o.direction {
                SortDirection::Asc => ord,
                SortDirection::Desc => ord.reverse(),
            }
        });
    }
    out
}

pub fn order_index(q: &VqlQuery, o: &OrderBy) -> usize {
    match &o.target {
        OrderTarget::X => 0,
        OrderTarget::Y => 1,
        OrderTarget::Item(item) => q.select.iter().position(|s| s == item).unwrap(),
    }
}

/// Canonical text of a cell. Numbers compare by value to nine significant
/// digits, so Int 3 and Float 3.0 agree.
pub fn canon(v: &Value) -> String {
    match v {
        Value::Int(i) => format!("n{:.9e}", *i as f64),
        Value::Float(f) => format!("n{:.9e}", f),
        Value::Null => "null".into(),
        Value::Date(d) => format!("d{d}"),
        Value::Text(s) => format!("t{s}"),
    }
}

pub fn canon_rows(rows: &[Vec<Value>]) -> Vec<Vec<String>> {
    rows.iter().map(|r| r.iter().map(canon).collect()).collect()
}

/// Compares an engine result against the reference: multisets of rows, and
/// the sequence of sort keys when the query orders its output.
pub fn agrees(q: &VqlQuery, engine: &[Vec<Value>], reference: &[Vec<Value>]) -> Result<(), String> {
    let mut a = canon_rows(engine);
    let mut b = canon_rows(reference);
    if let Some(o) = &q.order_by {
        let i = order_index(q, o);
        let ka: Vec<&String> = a.iter().map(|r| &r[i]).collect();
        let kb: Vec<&String> = b.iter().map(|r| &r[i]).collect();
        if ka != kb {
            return Err(format!(
                "order keys differ:\n engine    {ka:?}\n reference {kb:?}"
            ));
        }
    }
    a.sort();
    b.sort();
    if a != b {
        return Err(format!(
            "row multisets differ:\n engine    {a:?}\n reference {b:?}"
        ));
    }
    Ok(())
}
