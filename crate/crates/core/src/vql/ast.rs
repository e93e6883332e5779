use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisType {
    Bar,
    Pie,
    Line,
    Scatter,
    StackedBar,
    GroupedLine,
    GroupedScatter,
}

impl VisType {
    pub const ALL: [VisType; 7] = [
        VisType::Bar,
        VisType::Pie,
        VisType::Line,
        VisType::Scatter,
        VisType::StackedBar,
        VisType::GroupedLine,
        VisType::GroupedScatter,
    ];

    /// Complex charts carry a third, grouping channel.
    pub fn is_complex(self) -> bool {
        matches!(
            self,
            VisType::StackedBar | VisType::GroupedLine | VisType::GroupedScatter
        )
    }

    /// Number of SELECT items the chart needs.
    pub fn arity(self) -> usize {
        if self.is_complex() {
            3
        } else {
            2
        }
    }

    /// Surface keyword, e.g. `STACKED BAR`.
    pub fn keyword(self) -> &'static str {
        match self {
            VisType::Bar => "BAR",
            VisType::Pie => "PIE",
            VisType::Line => "LINE",
            VisType::Scatter => "SCATTER",
            VisType::StackedBar => "STACKED BAR",
            VisType::GroupedLine => "GROUPED LINE",
            VisType::GroupedScatter => "GROUPED SCATTER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table: Option<String>,
    pub column: String,
}

impl ColumnRef {
    pub fn bare(column: impl Into<String>) -> Self {
        ColumnRef {
            table: None,
            column: column.into(),
        }
    }

    pub fn qualified(table: impl Into<String>, column: impl Into<String>) -> Self {
        ColumnRef {
            table: Some(table.into()),
            column: column.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [
        AggFunc::Count,
        AggFunc::Sum,
        AggFunc::Avg,
        AggFunc::Min,
        AggFunc::Max,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        AggFunc::ALL
            .into_iter()
            .find(|f| f.keyword().eq_ignore_ascii_case(word))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SelectItem {
    Column(ColumnRef),
    Aggregate {
        func: AggFunc,
        arg: ColumnRef,
        distinct: bool,
    },
}

impl SelectItem {
    pub fn column_ref(&self) -> &ColumnRef {
        match self {
            SelectItem::Column(c) => c,
            SelectItem::Aggregate { arg, .. } => arg,
        }
    }

    pub fn is_aggregate(&self) -> bool {
        matches!(self, SelectItem::Aggregate { .. })
    }

    /// Output column name: the bare column, or `count_Document_ID` style for
    /// aggregates.
    pub fn output_name(&self) -> String {
        match self {
            SelectItem::Column(c) => c.column.clone(),
            SelectItem::Aggregate {
                func,
                arg,
                distinct,
            } => {
                let f = func.keyword().to_ascii_lowercase();
                if *distinct {
                    format!("{f}_distinct_{}", arg.column)
                } else {
                    format!("{f}_{}", arg.column)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

impl TableRef {
    /// Name columns are qualified with: the alias, else the table name.
    pub fn binding_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JoinClause {
    pub table: TableRef,
    pub on_left: ColumnRef,
    pub on_right: ColumnRef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Like,
}

impl CompareOp {
    pub const ALL: [CompareOp; 7] = [
        CompareOp::Eq,
        CompareOp::NotEq,
        CompareOp::Lt,
        CompareOp::LtEq,
        CompareOp::Gt,
        CompareOp::GtEq,
        CompareOp::Like,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::NotEq => "!=",
            CompareOp::Lt => "<",
            CompareOp::LtEq => "<=",
            CompareOp::Gt => ">",
            CompareOp::GtEq => ">=",
            CompareOp::Like => "LIKE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Int(i64),
    Float(f64),
    Date(NaiveDate),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Compare {
        column: ColumnRef,
        op: CompareOp,
        value: Literal,
    },
    IsNotNull(ColumnRef),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
}

impl Predicate {
    /// Every column reference in the tree, left to right.
    pub fn columns(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.collect_columns(&mut out);
        out
    }

    fn collect_columns<'a>(&'a self, out: &mut Vec<&'a ColumnRef>) {
        match self {
            Predicate::Compare { column, .. } | Predicate::IsNotNull(column) => out.push(column),
            Predicate::And(l, r) | Predicate::Or(l, r) => {
                l.collect_columns(out);
                r.collect_columns(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OrderTarget {
    /// The first SELECT item.
    X,
    /// The second SELECT item.
    Y,
    Item(SelectItem),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OrderBy {
    pub target: OrderTarget,
    pub direction: SortDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinInterval {
    Year,
    Month,
    Day,
    Weekday,
}

impl BinInterval {
    pub const ALL: [BinInterval; 4] = [
        BinInterval::Year,
        BinInterval::Month,
        BinInterval::Day,
        BinInterval::Weekday,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BinInterval::Year => "YEAR",
            BinInterval::Month => "MONTH",
            BinInterval::Day => "DAY",
            BinInterval::Weekday => "WEEKDAY",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinClause {
    pub column: ColumnRef,
    pub interval: BinInterval,
}

/// One VQL sentence: chart type, relational core and an optional BIN clause.
#[derive(Debug, Clone, PartialEq)]
pub struct VqlQuery {
    pub vis: VisType,
    pub select: Vec<SelectItem>,
    pub from: TableRef,
    pub joins: Vec<JoinClause>,
    pub where_clause: Option<Predicate>,
    pub group_by: Vec<ColumnRef>,
    pub order_by: Option<OrderBy>,
    pub bin: Option<BinClause>,
}

impl VqlQuery {
    pub fn has_aggregate(&self) -> bool {
        self.select.iter().any(SelectItem::is_aggregate)
    }
}
