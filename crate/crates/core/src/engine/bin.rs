use std::cmp::Ordering;

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;

use crate::value::{parse_date, Value, ValueKey};
use crate::vql::{BinClause, BinInterval, VisType};

use super::{ColumnRole, DataTable, EngineCode, EngineError};

pub const WEEKDAY_NAMES: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];

pub const MONTH_NAMES: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

fn canonical_names(interval: BinInterval) -> Option<&'static [&'static str]> {
    match interval {
        BinInterval::Weekday => Some(&WEEKDAY_NAMES),
        BinInterval::Month => Some(&MONTH_NAMES),
        BinInterval::Year | BinInterval::Day => None,
    }
}

/// Position of a weekday or month name in its canonical list.
pub(crate) fn canonical_rank(v: &Value, interval: BinInterval) -> Option<usize> {
    let names = canonical_names(interval)?;
    match v {
        Value::Text(s) => names.iter().position(|n| n.eq_ignore_ascii_case(s)),
        _ => None,
    }
}

fn as_date(v: &Value) -> Option<NaiveDate> {
    match v {
        Value::Date(d) => Some(*d),
        Value::Text(s) => parse_date(s),
        _ => None,
    }
}

/// Maps one x value to its bucket. Nulls have no bucket.
///
/// Already-bucketed values (a weekday name under WEEKDAY, an integer under
/// YEAR) map to themselves.
pub fn bucket_value(v: &Value, interval: BinInterval) -> Result<Option<Value>, EngineError> {
    if v.is_null() {
        return Ok(None);
    }
    if let Some(rank) = canonical_rank(v, interval) {
        let names = canonical_names(interval).unwrap_or(&[]);
        return Ok(Some(Value::Text(names[rank].to_string())));
    }
    let bucket = match interval {
        BinInterval::Year => match v {
            Value::Int(y) => Some(Value::Int(*y)),
            Value::Float(f) if f.fract() == 0.0 && f.abs() < 1e9 => Some(Value::Int(*f as i64)),
            other => as_date(other).map(|d| Value::Int(d.year() as i64)),
        },
        BinInterval::Day => as_date(v).map(Value::Date),
        BinInterval::Weekday => as_date(v).map(|d| {
            Value::Text(WEEKDAY_NAMES[d.weekday().num_days_from_monday() as usize].to_string())
        }),
        BinInterval::Month => {
            as_date(v).map(|d| Value::Text(MONTH_NAMES[d.month0() as usize].to_string()))
        }
    };
    bucket.map(Some).ok_or_else(|| {
        EngineError::new(
            EngineCode::BadBin,
            format!(
                "cannot bin value '{v}' BY {}: expected a date{}",
                interval.keyword(),
                if interval == BinInterval::Year {
                    " or an integer year"
                } else {
                    ""
                }
            ),
        )
    })
}

#[derive(Default)]
struct Sum {
    int: Option<i64>,
    float: f64,
    any: bool,
    is_float: bool,
}

impl Sum {
    fn new() -> Self {
        Sum {
            int: Some(0),
            ..Sum::default()
        }
    }

    fn add(&mut self, v: &Value) {
        match v {
            Value::Int(i) => {
                self.int = self.int.and_then(|a| a.checked_add(*i));
                self.float += *i as f64;
                self.any = true;
            }
            Value::Float(f) => {
                self.float += f;
                self.is_float = true;
                self.any = true;
            }
            _ => {}
        }
    }

    fn finish(&self) -> Value {
        match (self.any, self.is_float, self.int) {
            (false, _, _) => Value::Null,
            (true, false, Some(i)) => Value::Int(i),
            _ => Value::Float(self.float),
        }
    }
}

/// Buckets the x column and re-aggregates y by summing per (bucket, group).
///
/// WEEKDAY and MONTH emit every canonical bucket for every group, filling
/// absent ones with zero, in canonical order. YEAR and DAY emit only the
/// buckets present, ascending. Rows with a null x are dropped.
pub fn apply_binning(
    t: &DataTable,
    bin: &BinClause,
    vis: VisType,
) -> Result<DataTable, EngineError> {
    let x = t.role_index(ColumnRole::X).ok_or_else(|| {
        EngineError::new(
            EngineCode::BadBin,
            format!("BIN {} has no x column to bin", bin.column),
        )
    })?;
    let y = t.role_index(ColumnRole::Y).ok_or_else(|| {
        EngineError::new(
            EngineCode::BadBin,
            "binning needs a y column to re-aggregate",
        )
    })?;
    let group = if vis.is_complex() {
        t.role_index(ColumnRole::Group)
    } else {
        None
    };
    let y_is_float = t.rows.iter().any(|r| matches!(r[y], Value::Float(_)));
    if let Some(bad) = t
        .rows
        .iter()
        .map(|r| &r[y])
        .find(|v| !(v.is_null() || v.is_numeric()))
    {
        return Err(EngineError::new(
            EngineCode::TypeMismatch,
            format!(
                "binned y column {} must be numeric, found '{bad}'",
                t.columns[y].name
            ),
        ));
    }

    // (bucket, group) -> (representative row, running sum)
    let mut cells: IndexMap<(ValueKey, ValueKey), (Vec<Value>, Sum)> = IndexMap::new();
    let mut groups: IndexMap<ValueKey, Value> = IndexMap::new();
    for row in &t.rows {
        let Some(bucket) = bucket_value(&row[x], bin.interval)? else {
            continue;
        };
        let g = group.map(|gi| row[gi].clone()).unwrap_or(Value::Null);
        groups.entry(g.key()).or_insert_with(|| g.clone());
        let entry = cells.entry((bucket.key(), g.key())).or_insert_with(|| {
            let mut rep = row.clone();
            rep[x] = bucket.clone();
            (rep, Sum::new())
        });
        entry.1.add(&row[y]);
    }

    let mut rows: Vec<Vec<Value>> = Vec::new();
    match canonical_names(bin.interval) {
        Some(names) => {
            if groups.is_empty() && group.is_none() {
                groups.insert(ValueKey::Null, Value::Null);
            }
            let mut group_values: Vec<Value> = groups.into_values().collect();
            group_values.sort_by(|a, b| a.total_cmp(b));
            for name in names {
                let bucket = Value::Text(name.to_string());
                for g in &group_values {
                    match cells.get(&(bucket.key(), g.key())) {
                        Some((rep, sum)) => {
                            let mut r = rep.clone();
                            r[y] = sum.finish();
                            rows.push(r);
                        }
                        None => {
                            let mut r = vec![Value::Null; t.columns.len()];
                            r[x] = bucket.clone();
                            r[y] = if y_is_float {
                                Value::Float(0.0)
                            } else {
                                Value::Int(0)
                            };
                            if let Some(gi) = group {
                                r[gi] = g.clone();
                            }
                            rows.push(r);
                        }
                    }
                }
            }
        }
        None => {
            for (rep, sum) in cells.into_values() {
                let mut r = rep;
                r[y] = sum.finish();
                rows.push(r);
            }
            rows.sort_by(|a, b| {
                let o = a[x].total_cmp(&b[x]);
                match (o, group) {
                    (Ordering::Equal, Some(gi)) => a[gi].total_cmp(&b[gi]),
                    _ => o,
                }
            });
        }
    }
    Ok(DataTable {
        columns: t.columns.clone(),
        rows,
    })
}
