//! Canonical single-line rendering of VQL.

use std::fmt::{self, Display, Write as _};

use super::ast::*;
use super::parser::is_reserved;

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_reserved(s)
}

struct Ident<'a>(&'a str);

impl Display for Ident<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_plain_ident(self.0) {
            f.write_str(self.0)
        } else {
            write!(f, "\"{}\"", self.0.replace('"', "\"\""))
        }
    }
}

impl Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.table {
            write!(f, "{}.", Ident(t))?;
        }
        write!(f, "{}", Ident(&self.column))
    }
}

impl Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Column(c) => write!(f, "{c}"),
            SelectItem::Aggregate {
                func,
                arg,
                distinct,
            } => {
                let d = if *distinct { "DISTINCT " } else { "" };
                write!(f, "{}({d}{arg})", func.keyword())
            }
        }
    }
}

impl Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Ident(&self.name))?;
        if let Some(a) = &self.alias {
            write!(f, " {}", Ident(a))?;
        }
        Ok(())
    }
}

impl Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a decimal point or exponent so the value re-lexes as a float
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Date(d) => write!(f, "DATE '{}'", d.format("%Y-%m-%d")),
        }
    }
}

impl Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Compare { column, op, value } => {
                write!(f, "{column} {} {value}", op.symbol())
            }
            Predicate::IsNotNull(c) => write!(f, "{c} IS NOT NULL"),
            Predicate::And(l, r) => {
                fmt_operand(f, l, matches!(**l, Predicate::Or(..)))?;
                f.write_str(" AND ")?;
                fmt_operand(f, r, matches!(**r, Predicate::And(..) | Predicate::Or(..)))
            }
            Predicate::Or(l, r) => {
                fmt_operand(f, l, false)?;
                f.write_str(" OR ")?;
                fmt_operand(f, r, matches!(**r, Predicate::Or(..)))
            }
        }
    }
}

fn fmt_operand(f: &mut fmt::Formatter<'_>, p: &Predicate, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

impl Display for OrderBy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            OrderTarget::X => f.write_str("X")?,
            OrderTarget::Y => f.write_str("Y")?,
            // a bare column literally named x or y must not read back as a pseudo-target
            OrderTarget::Item(SelectItem::Column(c))
                if c.table.is_none()
                    && (c.column.eq_ignore_ascii_case("x")
                        || c.column.eq_ignore_ascii_case("y")) =>
            {
                write!(f, "\"{}\"", c.column)?
            }
            OrderTarget::Item(item) => write!(f, "{item}")?,
        }
        match self.direction {
            SortDirection::Asc => f.write_str(" ASC"),
            SortDirection::Desc => f.write_str(" DESC"),
        }
    }
}

impl Display for VqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Visualize {} SELECT ", self.vis.keyword())?;
        write_list(f, &self.select)?;
        write!(f, " FROM {}", self.from)?;
        for j in &self.joins {
            write!(f, " JOIN {} ON {} = {}", j.table, j.on_left, j.on_right)?;
        }
        if let Some(w) = &self.where_clause {
            write!(f, " WHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str(" GROUP BY ")?;
            write_list(f, &self.group_by)?;
        }
        if let Some(o) = &self.order_by {
            write!(f, " ORDER BY {o}")?;
        }
        if let Some(b) = &self.bin {
            write!(f, " BIN {} BY {}", b.column, b.interval.keyword())?;
        }
        Ok(())
    }
}

fn write_list<T: Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

/// Canonical text of `q`.
pub fn print_vql(q: &VqlQuery) -> String {
    q.to_string()
}

/// Masks every identifier and literal with `_`, keeping the clause skeleton,
/// chart type and bin interval.
pub fn extract_sketch(q: &VqlQuery) -> String {
    let mut out = format!("Visualize {} SELECT ", q.vis.keyword());
    out.push_str(&vec!["_"; q.select.len()].join(" , "));
    out.push_str(" FROM _");
    for _ in &q.joins {
        out.push_str(" JOIN _ ON _");
    }
    if q.where_clause.is_some() {
        out.push_str(" WHERE _");
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY _");
    }
    if let Some(o) = &q.order_by {
        let dir = match o.direction {
            SortDirection::Asc => "ASC",
            SortDirection::Desc => "DESC",
        };
        let _ = write!(out, " ORDER BY _ {dir}");
    }
    if let Some(b) = &q.bin {
        let _ = write!(out, " BIN _ BY {}", b.interval.keyword());
    }
    out
}
