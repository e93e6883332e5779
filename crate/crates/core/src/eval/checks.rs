use std::cmp::Ordering;
use std::fmt;

use chrono::NaiveDate;

use crate::agents::{OrchestrateError, Success};
use crate::engine::{ChartSpec, ColumnRole, SortBy, MONTH_NAMES, SPEC_VERSION, WEEKDAY_NAMES};
use crate::value::{parse_date, Value};
use crate::vql::SortDirection;

use super::{Channel, CheckName, CheckResult, GroundTruth, Outcome, OutcomeKind};

const REL_TOL: f64 = 1e-6;
const ABS_TOL: f64 = 1e-9;

/// One cell in comparison form. Strings that parse as dates become dates,
/// so "2021-03-04" and a `Date` value meet.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Num(f64),
    Date(NaiveDate),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Null => f.write_str("null"),
            Cell::Num(n) => write!(f, "{n}"),
            Cell::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            Cell::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl Cell {
    fn from_text(s: &str) -> Cell {
        let t = s.trim();
        match parse_date(t) {
            Some(d) => Cell::Date(d),
            None => Cell::Text(t.to_string()),
        }
    }

    pub fn from_value(v: &Value) -> Cell {
        match v {
            Value::Null => Cell::Null,
            Value::Int(i) => Cell::Num(*i as f64),
            Value::Float(x) => Cell::Num(*x),
            Value::Date(d) => Cell::Date(*d),
            Value::Text(s) => Cell::from_text(s),
        }
    }

    pub fn from_json(v: &serde_json::Value) -> Cell {
        match v {
            serde_json::Value::Null => Cell::Null,
            serde_json::Value::Number(n) => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
            serde_json::Value::String(s) => Cell::from_text(s),
            other => Cell::Text(other.to_string()),
        }
    }

    pub fn matches(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) => num_eq(*a, *b),
            (a, b) => a == b,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Cell::Null => 0,
            Cell::Num(_) => 1,
            Cell::Date(_) => 2,
            Cell::Text(_) => 3,
        }
    }

    /// Ordering used by the order check. Weekday and month names order by
    /// calendar position when both sides come from the same list.
    fn order_cmp(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Num(a), Cell::Num(b)) if num_eq(*a, *b) => Ordering::Equal,
            (Cell::Num(a), Cell::Num(b)) => a.total_cmp(b),
            (Cell::Date(a), Cell::Date(b)) => a.cmp(b),
            (Cell::Text(a), Cell::Text(b)) => {
                for names in [&WEEKDAY_NAMES[..], &MONTH_NAMES[..]] {
                    let pos = |s: &str| names.iter().position(|n| n.eq_ignore_ascii_case(s));
                    if let (Some(i), Some(j)) = (pos(a), pos(b)) {
                        return i.cmp(&j);
                    }
                }
                a.cmp(b)
            }
            (a, b) => a.kind_rank().cmp(&b.kind_rank()),
        }
    }
}

fn num_eq(a: f64, b: f64) -> bool {
    let diff = (a - b).abs();
    diff <= ABS_TOL || diff <= REL_TOL * a.abs().max(b.abs())
}

/// Cells in x, y[, group] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tuple(pub Vec<Cell>);

impl Tuple {
    fn matches(&self, other: &Tuple) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.matches(b))
    }

    fn swapped(&self) -> Tuple {
        let mut cells = self.0.clone();
        if cells.len() >= 2 {
            cells.swap(0, 1);
        }
        Tuple(cells)
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Multiset equality under tolerance. `Err` names the first tuple of `a`
/// with no partner in `b`, or else the first unmatched tuple of `b`.
fn multiset_diff(a: &[Tuple], b: &[Tuple]) -> Result<(), String> {
    let mut used = vec![false; b.len()];
    for t in a {
        let hit = b
            .iter()
            .enumerate()
            .position(|(j, u)| !used[j] && t.matches(u));
        match hit {
            Some(j) => used[j] = true,
            None => return Err(format!("chart tuple {t} has no ground-truth match")),
        }
    }
    if let Some(j) = used.iter().position(|u| !u) {
        return Err(format!("ground-truth tuple {} missing from chart", b[j]));
    }
    Ok(())
}

/// Compares two tuple multisets, retrying with x and y swapped on the
/// first side when `allow_swap` is set. The error describes the unswapped
/// comparison.
pub fn compare_tuples(a: &[Tuple], b: &[Tuple], allow_swap: bool) -> Result<(), String> {
    let direct = multiset_diff(a, b);
    if direct.is_ok() || !allow_swap {
        return direct;
    }
    let swapped: Vec<Tuple> = a.iter().map(Tuple::swapped).collect();
    match multiset_diff(&swapped, b) {
        Ok(()) => Ok(()),
        Err(_) => direct,
    }
}

pub fn check_execution(result: &Result<Success, OrchestrateError>) -> CheckResult {
    match result {
        Ok(_) => CheckResult::pass(CheckName::Execution),
        Err(OrchestrateError::Failed(report)) => {
            CheckResult::fail(CheckName::Execution, report.last_error.clone())
        }
        Err(e) => CheckResult::fail(CheckName::Execution, e.to_string()),
    }
}

pub fn check_surface_form(spec: &ChartSpec) -> CheckResult {
    let fail = |d: String| CheckResult::fail(CheckName::SurfaceForm, d);
    if spec.spec_version != SPEC_VERSION {
        return fail(format!("unsupported spec version {}", spec.spec_version));
    }
    if spec.x.field.trim().is_empty() {
        return fail("x encoding has no field".into());
    }
    if spec.y.field.trim().is_empty() {
        return fail("y encoding has no field".into());
    }
    let complex = spec.mark.is_complex();
    match (&spec.group, complex) {
        (None, true) => {
            return fail(format!(
                "{} chart lacks a group encoding",
                spec.mark.keyword()
            ))
        }
        (Some(_), false) => {
            return fail(format!(
                "{} chart carries a group encoding",
                spec.mark.keyword()
            ))
        }
        (Some(g), true) if g.field.trim().is_empty() => {
            return fail("group encoding has no field".into())
        }
        _ => {}
    }
    let mut roles = vec![ColumnRole::X, ColumnRole::Y];
    if complex {
        roles.push(ColumnRole::Group);
    }
    for r in roles {
        if spec.data.role_index(r).is_none() {
            return fail(format!("data has no {r:?} column").to_lowercase());
        }
    }
    CheckResult::pass(CheckName::SurfaceForm)
}

pub fn check_chart_type(spec: &ChartSpec, gt: &GroundTruth) -> CheckResult {
    if gt.chart_type.contains(&spec.mark) {
        return CheckResult::pass(CheckName::ChartType);
    }
    let want: Vec<&str> = gt.chart_type.iter().map(|v| v.keyword()).collect();
    CheckResult::fail(
        CheckName::ChartType,
        format!(
            "mark {} not in {{{}}}",
            spec.mark.keyword(),
            want.join(", ")
        ),
    )
}

fn spec_tuples(spec: &ChartSpec, width: usize) -> Result<Vec<Tuple>, String> {
    let roles = [ColumnRole::X, ColumnRole::Y, ColumnRole::Group];
    let idx: Vec<usize> = roles[..width]
        .iter()
        .map(|r| {
            spec.data
                .role_index(*r)
                .ok_or_else(|| format!("chart data has no {r:?} column").to_lowercase())
        })
        .collect::<Result<_, _>>()?;
    Ok(spec
        .data
        .rows
        .iter()
        .map(|row| Tuple(idx.iter().map(|&i| Cell::from_value(&row[i])).collect()))
        .collect())
}

fn truth_tuples(gt: &GroundTruth) -> Vec<Tuple> {
    let ch = &gt.data.channels;
    let mut order: Vec<usize> = Vec::with_capacity(ch.len());
    for c in [Channel::X, Channel::Y, Channel::Group] {
        if let Some(p) = ch.iter().position(|&x| x == c) {
            order.push(p);
        }
    }
    gt.data
        .rows
        .iter()
        .map(|r| Tuple(order.iter().map(|&i| Cell::from_json(&r[i])).collect()))
        .collect()
}

pub fn check_data(spec: &ChartSpec, gt: &GroundTruth) -> CheckResult {
    let truth = truth_tuples(gt);
    let width = truth.first().map_or(2, |t| t.0.len());
    let got = match spec_tuples(spec, width) {
        Ok(t) => t,
        Err(e) => return CheckResult::fail(CheckName::Data, e),
    };
    match compare_tuples(&got, &truth, !gt.pinned) {
        Ok(()) => CheckResult::pass(CheckName::Data),
        Err(e) => CheckResult::fail(CheckName::Data, e),
    }
}

pub fn check_order(spec: &ChartSpec, gt: &GroundTruth) -> CheckResult {
    let Some(sort) = gt.sort else {
        return CheckResult::pass(CheckName::Order);
    };
    let role = match sort.channel {
        SortBy::X => ColumnRole::X,
        SortBy::Y => ColumnRole::Y,
    };
    let Some(i) = spec.data.role_index(role) else {
        return CheckResult::fail(
            CheckName::Order,
            format!("chart data has no {role:?} column"),
        );
    };
    let cells: Vec<Cell> = spec
        .data
        .rows
        .iter()
        .map(|r| Cell::from_value(&r[i]))
        .collect();
    let bad = match sort.direction {
        SortDirection::Asc => Ordering::Greater,
        SortDirection::Desc => Ordering::Less,
    };
    for (k, w) in cells.windows(2).enumerate() {
        if w[0].order_cmp(&w[1]) == bad {
            let ch = match sort.channel {
                SortBy::X => "x",
                SortBy::Y => "y",
            };
            let dir = match sort.direction {
                SortDirection::Asc => "asc",
                SortDirection::Desc => "desc",
            };
            return CheckResult::fail(
                CheckName::Order,
                format!(
                    "rows {k} and {} break {ch} {dir} order ({} before {})",
                    k + 1,
                    w[0],
                    w[1]
                ),
            );
        }
    }
    CheckResult::pass(CheckName::Order)
}

/// Runs the check chain, stopping at the first failure.
pub fn evaluate_checks(
    result: &Result<Success, OrchestrateError>,
    gt: &GroundTruth,
) -> Vec<CheckResult> {
    let mut out = vec![check_execution(result)];
    let Ok(success) = result else {
        return out;
    };
    let spec = &success.spec;
    let steps: [fn(&ChartSpec, &GroundTruth) -> CheckResult; 4] = [
        |s, _| check_surface_form(s),
        check_chart_type,
        check_data,
        check_order,
    ];
    for step in steps {
        let r = step(spec, gt);
        let stop = !r.passed;
        out.push(r);
        if stop {
            break;
        }
    }
    out
}

/// The first failing check decides the outcome.
pub fn classify_outcome(checks: &[CheckResult], readability: Option<f64>) -> Outcome {
    let readability = readability.map(|r| r.clamp(0.0, 5.0));
    match checks.iter().find(|c| !c.passed) {
        Some(c) => Outcome {
            kind: if c.name.is_invalid_type() {
                OutcomeKind::Invalid
            } else {
                OutcomeKind::Illegal
            },
            readability,
            quality: Some(0.0),
        },
        None => Outcome {
            kind: OutcomeKind::Pass,
            readability,
            quality: readability,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{
        DataColumn, DataTable, GroupEncoding, SortSpec, ValueKind, XEncoding, YEncoding,
    };
    use crate::eval::{GroundTruthData, GroundTruthSort};
    use crate::vql::VisType;
    use serde_json::json;

    fn spec(mark: VisType, rows: Vec<Vec<Value>>) -> ChartSpec {
        let mut columns = vec![
            DataColumn {
                name: "x".into(),
                role: ColumnRole::X,
            },
            DataColumn {
                name: "y".into(),
                role: ColumnRole::Y,
            },
        ];
        if mark.is_complex() {
            columns.push(DataColumn {
                name: "g".into(),
                role: ColumnRole::Group,
            });
        }
        ChartSpec {
            spec_version: SPEC_VERSION,
            mark,
            x: XEncoding {
                field: "x".into(),
                kind: ValueKind::Categorical,
                sort: None::<SortSpec>,
            },
            y: YEncoding { field: "y".into() },
            group: mark
                .is_complex()
                .then(|| GroupEncoding { field: "g".into() }),
            data: DataTable { columns, rows },
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
        }
    }

    fn gt(types: &[VisType], rows: serde_json::Value) -> GroundTruth {
        let rows: Vec<Vec<serde_json::Value>> = serde_json::from_value(rows).unwrap();
        let channels = if rows[0].len() == 3 {
            vec![Channel::X, Channel::Y, Channel::Group]
        } else {
            vec![Channel::X, Channel::Y]
        };
        GroundTruth {
            chart_type: types.to_vec(),
            data: GroundTruthData { channels, rows },
            sort: None,
            pinned: false,
        }
    }

    fn t(s: &str) -> Value {
        Value::Text(s.into())
    }

    #[test]
    fn chart_type_membership() {
        let s = spec(VisType::StackedBar, vec![]);
        assert!(!check_chart_type(&s, &gt(&[VisType::Bar], json!([["a", 1]]))).passed);
        let s = spec(VisType::GroupedLine, vec![]);
        let g = gt(&[VisType::GroupedLine, VisType::Line], json!([["a", 1]]));
        assert!(check_chart_type(&s, &g).passed);
    }

    #[test]
    fn data_is_order_insensitive_and_swappable() {
        let g = gt(&[VisType::Bar], json!([["a", 1], ["b", 2.0000001]]));
        let s = spec(
            VisType::Bar,
            vec![vec![t("b"), Value::Int(2)], vec![t("a"), Value::Int(1)]],
        );
        assert!(check_data(&s, &g).passed);
        let s = spec(
            VisType::Bar,
            vec![vec![Value::Int(1), t("a")], vec![Value::Int(2), t("b")]],
        );
        assert!(check_data(&s, &g).passed);
        let mut pinned = g.clone();
        pinned.pinned = true;
        assert!(!check_data(&s, &pinned).passed);
    }

    #[test]
    fn data_mismatch_names_tuple() {
        let g = gt(&[VisType::Bar], json!([["a", 3], ["b", 2]]));
        let s = spec(
            VisType::Bar,
            vec![vec![t("a"), Value::Int(4)], vec![t("b"), Value::Int(2)]],
        );
        let r = check_data(&s, &g);
        assert!(!r.passed);
        assert_eq!(r.detail, "chart tuple (\"a\", 4) has no ground-truth match");
    }

    #[test]
    fn dates_and_trimmed_text_compare() {
        let g = gt(
            &[VisType::Line],
            json!([["2021-03-04 10:00:00", 1], [" x ", 2]]),
        );
        let d = NaiveDate::from_ymd_opt(2021, 3, 4).unwrap();
        let s = spec(
            VisType::Line,
            vec![
                vec![Value::Date(d), Value::Int(1)],
                vec![t("x"), Value::Int(2)],
            ],
        );
        assert!(check_data(&s, &g).passed);
    }

    #[test]
    fn order_tolerates_ties() {
        let mut g = gt(&[VisType::Bar], json!([["a", 1]]));
        g.sort = Some(GroundTruthSort {
            channel: SortBy::Y,
            direction: SortDirection::Desc,
        });
        let rows = |ys: &[i64]| ys.iter().map(|&y| vec![t("k"), Value::Int(y)]).collect();
        assert!(check_order(&spec(VisType::Bar, rows(&[5, 3, 3, 1])), &g).passed);
        let r = check_order(&spec(VisType::Bar, rows(&[1, 3])), &g);
        assert!(!r.passed);
        assert!(r.detail.contains("y desc"));
        g.sort = None;
        assert!(check_order(&spec(VisType::Bar, rows(&[1, 3])), &g).passed);
    }

    #[test]
    fn order_uses_calendar_for_names() {
        let mut g = gt(&[VisType::Bar], json!([["a", 1]]));
        g.sort = Some(GroundTruthSort {
            channel: SortBy::X,
            direction: SortDirection::Asc,
        });
        let s = spec(
            VisType::Bar,
            vec![
                vec![t("Monday"), Value::Int(1)],
                vec![t("Friday"), Value::Int(1)],
            ],
        );
        assert!(check_order(&s, &g).passed);
    }

    #[test]
    fn surface_form_rules() {
        assert!(check_surface_form(&spec(VisType::Bar, vec![])).passed);
        let mut s = spec(VisType::StackedBar, vec![]);
        s.group = None;
        assert!(!check_surface_form(&s).passed);
        let mut s = spec(VisType::Bar, vec![]);
        s.spec_version = 2;
        assert_eq!(check_surface_form(&s).detail, "unsupported spec version 2");
    }

    #[test]
    fn outcome_precedence() {
        let c = |name, passed| CheckResult {
            name,
            passed,
            detail: if passed { String::new() } else { "x".into() },
        };
        let o = classify_outcome(&[c(CheckName::Execution, false)], Some(4.0));
        assert_eq!((o.kind, o.quality), (OutcomeKind::Invalid, Some(0.0)));
        let o = classify_outcome(
            &[
                c(CheckName::Execution, true),
                c(CheckName::SurfaceForm, true),
                c(CheckName::ChartType, true),
                c(CheckName::Data, false),
            ],
            None,
        );
        assert_eq!((o.kind, o.quality), (OutcomeKind::Illegal, Some(0.0)));
        let o = classify_outcome(&[c(CheckName::Execution, true)], Some(3.5));
        assert_eq!((o.kind, o.quality), (OutcomeKind::Pass, Some(3.5)));
        let o = classify_outcome(&[c(CheckName::Execution, true)], None);
        assert_eq!((o.kind, o.quality), (OutcomeKind::Pass, None));
    }
}
