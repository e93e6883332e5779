use serde::{Deserialize, Serialize};

use crate::value::Value;
use crate::vql::{BinInterval, OrderTarget, SelectItem, SortDirection, VisType, VqlQuery};

use super::{ColumnRole, DataTable};

pub const SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Categorical,
    Temporal,
    Quantitative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortBy {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortSpec {
    pub by: SortBy,
    pub direction: SortDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct XEncoding {
    pub field: String,
    pub kind: ValueKind,
    pub sort: Option<SortSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YEncoding {
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupEncoding {
    pub field: String,
}

/// Declarative chart. Field order is the JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub spec_version: u32,
    pub mark: VisType,
    pub x: XEncoding,
    pub y: YEncoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupEncoding>,
    pub data: DataTable,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl ChartSpec {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("chart spec serializes")
    }
}

fn same_item(a: &SelectItem, b: &SelectItem) -> bool {
    let col = |s: &SelectItem| s.column_ref().column.to_ascii_lowercase();
    match (a, b) {
        (SelectItem::Column(_), SelectItem::Column(_)) => col(a) == col(b),
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
        ) => f1 == f2 && d1 == d2 && col(a) == col(b),
        _ => false,
    }
}

fn x_kind(q: &VqlQuery, t: &DataTable) -> ValueKind {
    match q.bin.as_ref().map(|b| b.interval) {
        Some(BinInterval::Weekday | BinInterval::Month) => return ValueKind::Categorical,
        Some(BinInterval::Year | BinInterval::Day) if q.vis != VisType::Bar => {
            return ValueKind::Temporal
        }
        _ => {}
    }
    if matches!(q.vis, VisType::Bar | VisType::StackedBar | VisType::Pie) {
        return ValueKind::Categorical;
    }
    let Some(x) = t.role_index(ColumnRole::X) else {
        return ValueKind::Categorical;
    };
    let mut values = t.column_values(x).filter(|v| !v.is_null()).peekable();
    if values.peek().is_none() {
        return ValueKind::Categorical;
    }
    let values: Vec<&Value> = values.collect();
    if values.iter().all(|v| matches!(v, Value::Date(_))) {
        ValueKind::Temporal
    } else if values.iter().all(|v| v.is_numeric()) {
        ValueKind::Quantitative
    } else {
        ValueKind::Categorical
    }
}

/// Binds the result table to chart encodings by select position.
pub fn build_chart_spec(q: &VqlQuery, t: &DataTable) -> ChartSpec {
    let label = |i: usize| {
        q.select
            .get(i)
            .map(SelectItem::output_name)
            .or_else(|| t.columns.get(i).map(|c| c.name.clone()))
            .unwrap_or_default()
    };
    let x_label = label(0);
    let y_label = label(1);
    let sort = q.order_by.as_ref().and_then(|o| {
        let idx = match &o.target {
            OrderTarget::X => Some(0),
            OrderTarget::Y => Some(1),
            OrderTarget::Item(item) => q.select.iter().position(|s| same_item(s, item)),
        }?;
        let by = match idx {
            0 => SortBy::X,
            1 => SortBy::Y,
            _ => return None,
        };
        Some(SortSpec {
            by,
            direction: o.direction,
        })
    });
    ChartSpec {
        spec_version: SPEC_VERSION,
        mark: q.vis,
        x: XEncoding {
            field: x_label.clone(),
            kind: x_kind(q, t),
            sort,
        },
        y: YEncoding {
            field: y_label.clone(),
        },
        group: q
            .vis
            .is_complex()
            .then(|| GroupEncoding { field: label(2) }),
        data: t.clone(),
        title: format!("{} Chart of {y_label} by {x_label}", q.vis.keyword()),
        x_label,
        y_label,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DataColumn;
    use crate::vql::parse_vql;

    fn empty_for(q: &VqlQuery) -> DataTable {
        DataTable {
            columns: crate::engine::exec::output_columns(q),
            rows: vec![],
        }
    }

    #[test]
    fn title_and_labels_follow_select() {
        let q = parse_vql(
            "Visualize BAR SELECT Date_Stored, COUNT(Document_ID) FROM All_Documents GROUP BY Date_Stored BIN Date_Stored BY WEEKDAY",
        )
        .unwrap();
        let spec = build_chart_spec(&q, &empty_for(&q));
        assert_eq!(spec.title, "BAR Chart of count_Document_ID by Date_Stored");
        assert_eq!(spec.x.kind, ValueKind::Categorical);
        assert_eq!(spec.y.field, "count_Document_ID");
        assert!(spec.group.is_none());
    }

    #[test]
    fn group_iff_complex() {
        let q =
            parse_vql("Visualize STACKED BAR SELECT a, SUM(b), c FROM T GROUP BY a, c").unwrap();
        let spec = build_chart_spec(&q, &empty_for(&q));
        assert_eq!(spec.group.unwrap().field, "c");
    }

    #[test]
    fn scatter_is_quantitative_without_sort() {
        let q = parse_vql("Visualize SCATTER SELECT a, b FROM T").unwrap();
        let mut t = empty_for(&q);
        t.rows.push(vec![Value::Int(1), Value::Float(2.0)]);
        let spec = build_chart_spec(&q, &t);
        assert_eq!(spec.x.kind, ValueKind::Quantitative);
        assert!(spec.x.sort.is_none());
    }

    #[test]
    fn sort_follows_order_by() {
        let q =
            parse_vql("Visualize BAR SELECT a, COUNT(a) FROM T GROUP BY a ORDER BY COUNT(a) DESC")
                .unwrap();
        let spec = build_chart_spec(&q, &empty_for(&q));
        assert_eq!(
            spec.x.sort,
            Some(SortSpec {
                by: SortBy::Y,
                direction: SortDirection::Desc
            })
        );
    }

    #[test]
    fn json_key_order_is_stable() {
        let q = parse_vql("Visualize PIE SELECT a, COUNT(a) FROM T GROUP BY a").unwrap();
        let mut t = empty_for(&q);
        t.columns[0] = DataColumn {
            name: "a".into(),
            role: ColumnRole::X,
        };
        let json = build_chart_spec(&q, &t).to_json();
        assert!(json.starts_with(r#"{"spec_version":1,"mark":"pie","x":{"field":"a","kind":"categorical","sort":null},"y":{"field":"count_a"},"data":"#));
        assert!(json.ends_with(
            r#""title":"PIE Chart of count_a by a","x_label":"a","y_label":"count_a"}"#
        ));
        let back: ChartSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, build_chart_spec(&q, &t));
    }
}
