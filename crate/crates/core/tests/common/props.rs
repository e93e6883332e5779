//! Property bodies shared by the proptest suites and the acceptance gate.
//! Each returns `Err` with a description on the first violation.

use std::collections::HashMap;

use chrono::{Datelike, NaiveDate};
use vizagent_core::catalog::DatabaseCatalog;
use vizagent_core::engine::{apply_binning, execute_relational, ColumnRole, DataColumn, DataTable};
use vizagent_core::value::Value;
use vizagent_core::vql::{
    parse_vql, print_vql, validate_vql, BinClause, BinInterval, ColumnRef, VisType, VqlQuery,
};

use super::gen::weekday_names;
use super::reference;

pub fn round_trip(q: &VqlQuery) -> Result<(), String> {
    let text = print_vql(q);
    let back = parse_vql(&text).map_err(|e| format!("{text}\n  does not parse: {e}"))?;
    if &back != q {
        return Err(format!("{text}\n  reparsed as {back:?}"));
    }
    if print_vql(&back) != text {
        return Err(format!("{text}\n  reprints differently"));
    }
    Ok(())
}

pub fn executor_matches_reference(catalog: &DatabaseCatalog, q: &VqlQuery) -> Result<(), String> {
    let errors = validate_vql(q, catalog);
    if !errors.is_empty() {
        return Err(format!(
            "generated query is invalid: {}: {errors:?}",
            print_vql(q)
        ));
    }
    let got = execute_relational(q, catalog).map_err(|e| format!("{}: {e}", print_vql(q)))?;
    let want = reference::evaluate(q, catalog);
    reference::agrees(q, &got.rows, &want).map_err(|e| format!("{}\n{e}", print_vql(q)))
}

/// Weekday binning over a hand-built table, checked against per-day sums
/// computed here.
pub fn weekday_binning(
    rows: &[(Option<NaiveDate>, i64, String)],
    grouped: bool,
) -> Result<(), String> {
    let mut columns = vec![
        DataColumn {
            name: "d".into(),
            role: ColumnRole::X,
        },
        DataColumn {
            name: "n".into(),
            role: ColumnRole::Y,
        },
    ];
    if grouped {
        columns.push(DataColumn {
            name: "g".into(),
            role: ColumnRole::Group,
        });
    }
    let table = DataTable {
        columns,
        rows: rows
            .iter()
            .map(|(d, n, g)| {
                let mut r = vec![d.map_or(Value::Null, Value::Date), Value::Int(*n)];
                if grouped {
                    r.push(Value::Text(g.clone()));
                }
                r
            })
            .collect(),
    };
    let vis = if grouped {
        VisType::StackedBar
    } else {
        VisType::Bar
    };
    let bin = BinClause {
        column: ColumnRef::bare("d"),
        interval: BinInterval::Weekday,
    };
    let out = apply_binning(&table, &bin, vis).map_err(|e| e.to_string())?;

    let mut groups: Vec<String> = rows
        .iter()
        .filter(|r| r.0.is_some())
        .map(|r| if grouped { r.2.clone() } else { String::new() })
        .collect();
    groups.sort();
    groups.dedup();
    if !grouped {
        groups = vec![String::new()];
    }
    let mut want: HashMap<(usize, String), i64> = HashMap::new();
    for (d, n, g) in rows {
        if let Some(d) = d {
            let g = if grouped { g.clone() } else { String::new() };
            *want
                .entry((d.weekday().num_days_from_monday() as usize, g))
                .or_default() += n;
        }
    }

    if out.rows.len() != 7 * groups.len() {
        return Err(format!(
            "{} rows for {} groups",
            out.rows.len(),
            groups.len()
        ));
    }
    let names = weekday_names();
    let mut seen = Vec::new();
    for (i, r) in out.rows.iter().enumerate() {
        let day = i / groups.len();
        let g = &groups[i % groups.len()];
        if r[0] != Value::Text(names[day].to_string()) {
            return Err(format!("row {i}: x {} where {} belongs", r[0], names[day]));
        }
        if grouped && r[2] != Value::Text(g.clone()) {
            return Err(format!("row {i}: group {} where {g} belongs", r[2]));
        }
        let expect = want.get(&(day, g.clone())).copied().unwrap_or(0);
        if r[1] != Value::Int(expect) {
            return Err(format!(
                "row {i} ({}, {g}): y {} expected {expect}",
                names[day], r[1]
            ));
        }
        if !seen.contains(&r[0]) {
            seen.push(r[0].clone());
        }
    }
    if !groups.is_empty() && seen.len() != 7 {
        return Err(format!("{} distinct x values", seen.len()));
    }
    let before: i64 = rows.iter().filter(|r| r.0.is_some()).map(|r| r.1).sum();
    let after: i64 = out
        .rows
        .iter()
        .map(|r| if let Value::Int(i) = r[1] { i } else { 0 })
        .sum();
    if before != after {
        return Err(format!("y sum {before} became {after}"));
    }
    Ok(())
}
