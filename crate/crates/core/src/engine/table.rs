use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value as Json};

use crate::value::{parse_date, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    X,
    Y,
    Group,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataColumn {
    pub name: String,
    pub role: ColumnRole,
}

/// Rectangular query result. Row order is meaningful: it is the order the
/// chart draws its marks in.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataTable {
    pub columns: Vec<DataColumn>,
    pub rows: Vec<Vec<Value>>,
}

impl DataTable {
    pub fn role_index(&self, role: ColumnRole) -> Option<usize> {
        self.columns.iter().position(|c| c.role == role)
    }

    pub fn column_values(&self, idx: usize) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(move |r| &r[idx])
    }

    fn is_date_column(&self, idx: usize) -> bool {
        self.rows.iter().any(|r| matches!(r[idx], Value::Date(_)))
    }
}

fn value_to_json(v: &Value) -> Json {
    match v {
        Value::Null => Json::Null,
        Value::Int(i) => json!(i),
        Value::Float(f) => json!(f),
        Value::Text(s) => json!(s),
        Value::Date(d) => json!(d.format("%Y-%m-%d").to_string()),
    }
}

fn value_from_json(v: &Json, date_column: bool) -> Result<Value, String> {
    Ok(match v {
        Json::Null => Value::Null,
        Json::Number(n) => match n.as_i64() {
            Some(i) if !n.is_f64() => Value::Int(i),
            _ => Value::Float(n.as_f64().ok_or("number out of range")?),
        },
        Json::String(s) if date_column => {
            Value::Date(parse_date(s).ok_or_else(|| format!("invalid date '{s}'"))?)
        }
        Json::String(s) => Value::Text(s.clone()),
        other => return Err(format!("unsupported cell {other}")),
    })
}

#[derive(Serialize, Deserialize)]
struct ColumnWire {
    name: String,
    role: ColumnRole,
    dtype: String,
}

#[derive(Serialize, Deserialize)]
struct TableWire {
    columns: Vec<ColumnWire>,
    rows: Vec<Vec<Json>>,
}

impl Serialize for DataTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let wire = TableWire {
            columns: self
                .columns
                .iter()
                .enumerate()
                .map(|(i, c)| ColumnWire {
                    name: c.name.clone(),
                    role: c.role,
                    dtype: if self.is_date_column(i) {
                        "date"
                    } else {
                        "any"
                    }
                    .into(),
                })
                .collect(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(value_to_json).collect())
                .collect(),
        };
        wire.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DataTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = TableWire::deserialize(d)?;
        let dates: Vec<bool> = wire.columns.iter().map(|c| c.dtype == "date").collect();
        let mut rows = Vec::with_capacity(wire.rows.len());
        for r in &wire.rows {
            if r.len() != wire.columns.len() {
                return Err(D::Error::custom("row width does not match columns"));
            }
            rows.push(
                r.iter()
                    .zip(&dates)
                    .map(|(v, &date)| value_from_json(v, date))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(D::Error::custom)?,
            );
        }
        Ok(DataTable {
            columns: wire
                .columns
                .into_iter()
                .map(|c| DataColumn {
                    name: c.name,
                    role: c.role,
                })
                .collect(),
            rows,
        })
    }
}
