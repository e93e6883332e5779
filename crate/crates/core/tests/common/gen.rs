//! Proptest strategies: arbitrary VQL syntax trees, and random catalogs
//! paired with queries that validate against them.

use chrono::NaiveDate;
use proptest::prelude::*;
use proptest::sample::select;
use vizagent_core::catalog::{ColumnType, DatabaseCatalog, TableDef};
use vizagent_core::engine::WEEKDAY_NAMES;
use vizagent_core::vql::*;

fn ident() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => "[a-z][a-z0-9_]{0,6}",
        1 => select(vec!["order", "Select", "dorm name", "x", "Y", "city code", "a\"b", "2nd"])
            .prop_map(String::from),
    ]
}

fn column_ref() -> impl Strategy<Value = ColumnRef> {
    (proptest::option::of(ident()), ident()).prop_map(|(table, column)| ColumnRef { table, column })
}

fn select_item() -> impl Strategy<Value = SelectItem> {
    prop_oneof![
        column_ref().prop_map(SelectItem::Column),
        (select(AggFunc::ALL.to_vec()), column_ref(), any::<bool>()).prop_map(
            |(func, arg, distinct)| SelectItem::Aggregate {
                func,
                arg,
                distinct
            }
        ),
    ]
}

fn table_ref() -> impl Strategy<Value = TableRef> {
    (ident(), proptest::option::of(ident())).prop_map(|(name, alias)| TableRef { name, alias })
}

fn date() -> impl Strategy<Value = NaiveDate> {
    (1990i32..2030, 1u32..=12, 1u32..=28)
        .prop_map(|(y, m, d)| NaiveDate::from_ymd_opt(y, m, d).unwrap())
}

fn literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        "[ -~]{0,8}".prop_map(Literal::Str),
        any::<i64>().prop_map(Literal::Int),
        (-1.0e6f64..1.0e6).prop_map(Literal::Float),
        date().prop_map(Literal::Date),
    ]
}

fn predicate() -> impl Strategy<Value = Predicate> {
    let leaf = prop_oneof![
        4 => (column_ref(), select(CompareOp::ALL.to_vec()), literal())
            .prop_map(|(column, op, value)| Predicate::Compare { column, op, value }),
        1 => column_ref().prop_map(Predicate::IsNotNull),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| Predicate::And(Box::new(l), Box::new(r))),
            (inner.clone(), inner).prop_map(|(l, r)| Predicate::Or(Box::new(l), Box::new(r))),
        ]
    })
}

fn direction() -> impl Strategy<Value = SortDirection> {
    prop_oneof![Just(SortDirection::Asc), Just(SortDirection::Desc)]
}

/// Any syntactically well-formed query. No schema behind it.
pub fn vql_query() -> impl Strategy<Value = VqlQuery> {
    select(VisType::ALL.to_vec()).prop_flat_map(|vis| {
        (
            proptest::collection::vec(select_item(), vis.arity()),
            table_ref(),
            proptest::collection::vec(
                (table_ref(), column_ref(), column_ref()).prop_map(|(table, on_left, on_right)| {
                    JoinClause {
                        table,
                        on_left,
                        on_right,
                    }
                }),
                0..3,
            ),
            proptest::option::of(predicate()),
            proptest::collection::vec(column_ref(), 0..3),
            proptest::option::of(
                (
                    prop_oneof![
                        Just(OrderTarget::X),
                        Just(OrderTarget::Y),
                        select_item().prop_map(OrderTarget::Item),
                    ],
                    direction(),
                )
                    .prop_map(|(target, direction)| OrderBy { target, direction }),
            ),
            proptest::option::of(
                (column_ref(), select(BinInterval::ALL.to_vec()))
                    .prop_map(|(column, interval)| BinClause { column, interval }),
            ),
        )
            .prop_map(
                move |(select, from, joins, where_clause, group_by, order_by, bin)| VqlQuery {
                    vis,
                    select,
                    from,
                    joins,
                    where_clause,
                    group_by,
                    order_by,
                    bin,
                },
            )
    })
}

const TEXTS: [&str; 5] = ["a", "b", "c", "ab", "b c"];
const DATES: [&str; 5] = [
    "2023-01-02",
    "2023-01-05",
    "2023-02-11",
    "2024-07-19",
    "2023-01-02",
];

fn raw_cell(col: usize) -> BoxedStrategy<String> {
    let null = Just(String::new());
    match col {
        // k: small join key
        0 => prop_oneof![6 => (0i32..4).prop_map(|i| i.to_string()), 1 => null].boxed(),
        // g: text
        1 => prop_oneof![6 => select(TEXTS.to_vec()).prop_map(String::from), 1 => null].boxed(),
        // n: numbers, sometimes fractional
        2 => prop_oneof![
            5 => (-5i32..10).prop_map(|i| i.to_string()),
            2 => (-20i32..20).prop_map(|i| format!("{}.5", i)),
            1 => null,
        ]
        .boxed(),
        // d: dates
        _ => prop_oneof![6 => select(DATES.to_vec()).prop_map(String::from), 1 => null].boxed(),
    }
}

const COLUMNS: [&str; 4] = ["k", "g", "n", "d"];

fn table(i: usize) -> impl Strategy<Value = TableDef> {
    proptest::collection::vec(
        (raw_cell(0), raw_cell(1), raw_cell(2), raw_cell(3))
            .prop_map(|(a, b, c, d)| vec![a, b, c, d]),
        0..=20,
    )
    .prop_map(move |rows| {
        TableDef::from_raw(
            format!("T{i}"),
            COLUMNS.iter().map(|c| c.to_string()).collect(),
            rows,
        )
        .unwrap()
    })
}

/// One to three tables `T0..T2`, each with columns k, g, n, d.
pub fn catalog() -> impl Strategy<Value = DatabaseCatalog> {
    (1usize..=3)
        .prop_flat_map(|n| proptest::collection::vec(Just(()), n))
        .prop_flat_map(|v| {
            let tables: Vec<_> = (0..v.len()).map(table).collect();
            tables
        })
        .prop_map(|tables| DatabaseCatalog::new("random", tables).unwrap())
}

fn col(alias: usize, name: &str) -> ColumnRef {
    ColumnRef::qualified(format!("a{alias}"), name)
}

fn literal_for(ty: ColumnType) -> BoxedStrategy<(CompareOp, Literal)> {
    let ordered = select(vec![
        CompareOp::Eq,
        CompareOp::NotEq,
        CompareOp::Lt,
        CompareOp::LtEq,
        CompareOp::Gt,
        CompareOp::GtEq,
    ]);
    match ty {
        ColumnType::Text => prop_oneof![
            (ordered, select(TEXTS.to_vec())).prop_map(|(o, s)| (o, Literal::Str(s.into()))),
            select(vec!["a%", "%c", "_", "%b%", "b_c", "%"])
                .prop_map(|p| (CompareOp::Like, Literal::Str(p.into()))),
        ]
        .boxed(),
        ColumnType::Date => (ordered, select(DATES.to_vec()))
            .prop_map(|(o, s)| {
                (
                    o,
                    Literal::Date(NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()),
                )
            })
            .boxed(),
        _ => prop_oneof![
            (ordered.clone(), -5i64..8).prop_map(|(o, i)| (o, Literal::Int(i))),
            (ordered, -5i32..8).prop_map(|(o, i)| (o, Literal::Float(i as f64 + 0.5))),
        ]
        .boxed(),
    }
}

fn typed_predicate(cols: Vec<(ColumnRef, ColumnType)>) -> BoxedStrategy<Predicate> {
    let leaf = select(cols)
        .prop_flat_map(|(c, ty)| {
            let c2 = c.clone();
            prop_oneof![
                5 => literal_for(ty).prop_map(move |(op, value)| Predicate::Compare { column: c.clone(), op, value }),
                1 => Just(Predicate::IsNotNull(c2)),
            ]
        })
        .boxed();
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| Predicate::And(Box::new(l), Box::new(r))),
            (inner.clone(), inner).prop_map(|(l, r)| Predicate::Or(Box::new(l), Box::new(r))),
        ]
    })
    .boxed()
}

/// A catalog and a query over it that passes validation. No BIN clause.
pub fn catalog_and_query() -> impl Strategy<Value = (DatabaseCatalog, VqlQuery)> {
    catalog()
        .prop_flat_map(|cat| {
            let n = cat.tables().len();
            let mut cols: Vec<(ColumnRef, ColumnType)> = Vec::new();
            for (i, t) in cat.tables().iter().enumerate() {
                for c in t.columns() {
                    cols.push((col(i, &c.name), c.inferred_type));
                }
            }
            let numeric: Vec<ColumnRef> = cols
                .iter()
                .filter(|(_, ty)| *ty == ColumnType::Number)
                .map(|(c, _)| c.clone())
                .collect();
            let all: Vec<ColumnRef> = cols.iter().map(|(c, _)| c.clone()).collect();
            // join i to any earlier table on k, either side first
            let joins = (1..n)
                .map(|i| {
                    (0..i, any::<bool>(), select(vec!["k", "k", "n"])).prop_map(
                        move |(j, flip, on)| {
                            let (l, r) = (col(j, on), col(i, on));
                            JoinClause {
                                table: TableRef {
                                    name: format!("T{i}"),
                                    alias: Some(format!("a{i}")),
                                },
                                on_left: if flip { r.clone() } else { l.clone() },
                                on_right: if flip { l } else { r },
                            }
                        },
                    )
                })
                .collect::<Vec<_>>();
            let agg_item = {
                let all = all.clone();
                let numeric = numeric.clone();
                (
                    select(AggFunc::ALL.to_vec()),
                    any::<bool>(),
                    any::<prop::sample::Index>(),
                )
                    .prop_map(move |(func, distinct, ix)| {
                        let pool = match func {
                            AggFunc::Sum | AggFunc::Avg if !numeric.is_empty() => &numeric,
                            AggFunc::Sum | AggFunc::Avg => {
                                return SelectItem::Aggregate {
                                    func: AggFunc::Count,
                                    arg: ix.get(&all).clone(),
                                    distinct,
                                };
                            }
                            _ => &all,
                        };
                        SelectItem::Aggregate {
                            func,
                            arg: ix.get(pool).clone(),
                            distinct,
                        }
                    })
            };
            (
                Just(cat),
                select(VisType::ALL.to_vec()),
                any::<bool>(),
                proptest::collection::vec(select(all.clone()), 3),
                agg_item,
                joins,
                proptest::option::of(typed_predicate(cols)),
                proptest::collection::vec(select(all), 0..2),
                proptest::option::of((0usize..4, direction())),
            )
        })
        .prop_map(
            |(cat, vis, aggregate, plain, agg, joins, where_clause, extra_group, order)| {
                let mut select: Vec<SelectItem> =
                    plain.iter().cloned().map(SelectItem::Column).collect();
                select.truncate(vis.arity());
                let mut group_by = Vec::new();
                if aggregate {
                    select[1] = agg;
                    for (i, s) in select.iter().enumerate() {
                        if i != 1 {
                            group_by.push(s.column_ref().clone());
                        }
                    }
                    group_by.extend(extra_group);
                } else if !extra_group.is_empty() {
                    group_by = extra_group;
                }
                let order_by = order.map(|(t, direction)| OrderBy {
                    target: match t {
                        0 => OrderTarget::X,
                        1 => OrderTarget::Y,
                        k => OrderTarget::Item(select[(k - 2).min(select.len() - 1)].clone()),
                    },
                    direction,
                });
                let q = VqlQuery {
                    vis,
                    select,
                    from: TableRef {
                        name: "T0".into(),
                        alias: Some("a0".into()),
                    },
                    joins,
                    where_clause,
                    group_by,
                    order_by,
                    bin: None,
                };
                (cat, q)
            },
        )
}

/// Date strings spread over every weekday, with nulls and groups.
pub fn weekday_table() -> impl Strategy<Value = (Vec<(Option<NaiveDate>, i64, String)>, bool)> {
    (
        proptest::collection::vec(
            (
                proptest::option::weighted(
                    0.9,
                    (0i64..400).prop_map(|d| {
                        NaiveDate::from_ymd_opt(2023, 1, 1).unwrap() + chrono::Duration::days(d)
                    }),
                ),
                0i64..50,
                select(vec!["p", "q", "r"]).prop_map(String::from),
            ),
            0..40,
        ),
        any::<bool>(),
    )
}

pub fn weekday_names() -> Vec<&'static str> {
    WEEKDAY_NAMES.to_vec()
}
