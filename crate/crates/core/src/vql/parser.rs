//! Recursive-descent parser for VQL.
//!
//! Keywords are case-insensitive and contextual: words such as `year` remain
//! valid column names outside the position where a keyword is expected. The
//! words in [`RESERVED`] never parse as bare identifiers; double-quote them.

use std::fmt;

use thiserror::Error;

use super::ast::*;
use crate::value::parse_date;

/// Words that cannot appear as unquoted identifiers or aliases.
pub const RESERVED: &[&str] = &[
    "VISUALIZE",
    "SELECT",
    "FROM",
    "JOIN",
    "INNER",
    "LEFT",
    "RIGHT",
    "FULL",
    "OUTER",
    "CROSS",
    "ON",
    "WHERE",
    "GROUP",
    "ORDER",
    "BY",
    "BIN",
    "AS",
    "AND",
    "OR",
    "NOT",
    "IS",
    "NULL",
    "LIKE",
    "ASC",
    "DESC",
    "DISTINCT",
    "HAVING",
    "LIMIT",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.iter().any(|r| r.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    /// Byte offset into the input.
    pub position: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ParseError: expected {} at byte {}, found {}",
            self.expected.join(" or "),
            self.position,
            self.found
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    QuotedIdent(String),
    Str(String),
    Int(i64),
    Float(f64),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Semi,
    Op(CompareOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("'{w}'"),
            Tok::QuotedIdent(w) => format!("\"{w}\""),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Float(x) => format!("number {x}"),
            Tok::Comma => "','".into(),
            Tok::Dot => "'.'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Star => "'*'".into(),
            Tok::Semi => "';'".into(),
            Tok::Op(op) => format!("'{}'", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(input: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, expected: &str, found: &str| ParseError {
        position: pos,
        expected: vec![expected.to_string()],
        found: found.to_string(),
    };
    while i < bytes.len() {
        let c = input[i..].chars().next().unwrap();
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let single = match c {
            ',' => Some(Tok::Comma),
            '.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Some(Tok::Dot),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '*' => Some(Tok::Star),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Op(CompareOp::Eq)),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, pos: start });
            i += 1;
            continue;
        }
        match c {
            '!' | '<' | '>' => {
                let next = bytes.get(i + 1).copied();
                let (op, len) = match (c, next) {
                    ('!', Some(b'=')) => (CompareOp::NotEq, 2),
                    ('<', Some(b'>')) => (CompareOp::NotEq, 2),
                    ('<', Some(b'=')) => (CompareOp::LtEq, 2),
                    ('>', Some(b'=')) => (CompareOp::GtEq, 2),
                    ('<', _) => (CompareOp::Lt, 1),
                    ('>', _) => (CompareOp::Gt, 1),
                    _ => return Err(err(start, "'!='", "'!'")),
                };
                out.push(Token {
                    tok: Tok::Op(op),
                    pos: start,
                });
                i += len;
            }
            '`' => {
                // `text' quoting: closes on either quote mark, no escapes
                let body = &input[i + 1..];
                let Some(end) = body.find(['\'', '`']) else {
                    return Err(err(start, "closing quote", "end of input"));
                };
                out.push(Token {
                    tok: Tok::Str(body[..end].to_string()),
                    pos: start,
                });
                i += end + 2;
            }
            '\'' | '"' => {
                let quote = c;
                let mut text = String::new();
                let mut j = i + 1;
                loop {
                    let Some(ch) = input[j..].chars().next() else {
                        return Err(err(start, "closing quote", "end of input"));
                    };
                    j += ch.len_utf8();
                    if ch == quote {
                        if input[j..].starts_with(quote) {
                            text.push(quote);
                            j += 1;
                            continue;
                        }
                        break;
                    }
                    text.push(ch);
                }
                let tok = if quote == '\'' {
                    Tok::Str(text)
                } else {
                    Tok::QuotedIdent(text)
                };
                out.push(Token { tok, pos: start });
                i = j;
            }
            c if c.is_ascii_digit() || c == '-' || c == '.' => {
                let mut j = i;
                if bytes[j] == b'-' {
                    j += 1;
                }
                let digits_start = j;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                let mut is_float = false;
                if j < bytes.len() && bytes[j] == b'.' {
                    is_float = true;
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        is_float = true;
                        j = k;
                    }
                }
                let text = &input[i..j];
                if j == digits_start || !text.chars().any(|c| c.is_ascii_digit()) {
                    return Err(err(start, "number", &format!("'{c}'")));
                }
                let tok = match (is_float, text.parse::<i64>()) {
                    (false, Ok(v)) => Tok::Int(v),
                    _ => Tok::Float(
                        text.parse::<f64>()
                            .map_err(|_| err(start, "number", &format!("'{text}'")))?,
                    ),
                };
                out.push(Token { tok, pos: start });
                i = j;
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while let Some(ch) = input[j..].chars().next() {
                    if ch.is_alphanumeric() || ch == '_' {
                        j += ch.len_utf8();
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Word(input[i..j].to_string()),
                    pos: start,
                });
                i = j;
            }
            other => return Err(err(start, "token", &format!("'{other}'"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: input.len(),
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError {
            position: t.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            self.error(&[kw])
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Word(w) if !is_reserved(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            Tok::QuotedIdent(w) if !w.is_empty() => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            _ => self.error(&[what]),
        }
    }

    fn at_ident(&self) -> bool {
        match &self.peek().tok {
            Tok::Word(w) => !is_reserved(w),
            Tok::QuotedIdent(w) => !w.is_empty(),
            _ => false,
        }
    }

    fn query(&mut self) -> Result<VqlQuery, ParseError> {
        self.expect_keyword("VISUALIZE")?;
        let vis = self.vis_type()?;
        self.expect_keyword("SELECT")?;
        let mut select = vec![self.select_item()?];
        while self.eat(&Tok::Comma) {
            select.push(self.select_item()?);
        }
        self.expect_keyword("FROM")?;
        let from = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.eat_keyword("INNER") {
                self.expect_keyword("JOIN")?;
            } else if !self.eat_keyword("JOIN") {
                break;
            }
            let table = self.table_ref()?;
            self.expect_keyword("ON")?;
            let on_left = self.column_ref()?;
            if !self.eat(&Tok::Op(CompareOp::Eq)) {
                return self.error(&["'='"]);
            }
            let on_right = self.column_ref()?;
            joins.push(JoinClause {
                table,
                on_left,
                on_right,
            });
        }
        let where_clause = if self.eat_keyword("WHERE") {
            Some(self.or_predicate()?)
        } else {
            None
        };
        let mut group_by = Vec::new();
        if self.eat_keyword("GROUP") {
            self.expect_keyword("BY")?;
            group_by.push(self.column_ref()?);
            while self.eat(&Tok::Comma) {
                group_by.push(self.column_ref()?);
            }
        }
        let order_by = if self.eat_keyword("ORDER") {
            self.expect_keyword("BY")?;
            Some(self.order_by()?)
        } else {
            None
        };
        let bin = if self.eat_keyword("BIN") {
            let column = self.column_ref()?;
            self.expect_keyword("BY")?;
            let interval = self.interval()?;
            Some(BinClause { column, interval })
        } else {
            None
        };
        self.eat(&Tok::Semi);
        if self.peek().tok != Tok::Eof {
            let mut expected = Vec::new();
            if where_clause.is_none() && group_by.is_empty() && order_by.is_none() && bin.is_none()
            {
                expected.extend(["JOIN", "WHERE"]);
            }
            if group_by.is_empty() && order_by.is_none() && bin.is_none() {
                expected.push("GROUP BY");
            }
            if order_by.is_none() && bin.is_none() {
                expected.push("ORDER BY");
            }
            if bin.is_none() {
                expected.push("BIN");
            }
            expected.push("end of input");
            return self.error(&expected);
        }
        Ok(VqlQuery {
            vis,
            select,
            from,
            joins,
            where_clause,
            group_by,
            order_by,
            bin,
        })
    }

    fn vis_type(&mut self) -> Result<VisType, ParseError> {
        const EXPECTED: &[&str] = &[
            "BAR",
            "PIE",
            "LINE",
            "SCATTER",
            "STACKED BAR",
            "GROUPED LINE",
            "GROUPED SCATTER",
        ];
        let vis = if self.eat_keyword("BAR") {
            VisType::Bar
        } else if self.eat_keyword("PIE") {
            VisType::Pie
        } else if self.eat_keyword("LINE") {
            VisType::Line
        } else if self.eat_keyword("SCATTER") {
            VisType::Scatter
        } else if self.eat_keyword("STACKED") {
            self.expect_keyword("BAR")?;
            VisType::StackedBar
        } else if self.eat_keyword("GROUPED") {
            if self.eat_keyword("LINE") {
                VisType::GroupedLine
            } else if self.eat_keyword("SCATTER") {
                VisType::GroupedScatter
            } else {
                return self.error(&["LINE", "SCATTER"]);
            }
        } else {
            return self.error(EXPECTED);
        };
        Ok(vis)
    }

    fn select_item(&mut self) -> Result<SelectItem, ParseError> {
        if let Tok::Word(w) = &self.peek().tok {
            if let Some(func) = AggFunc::from_keyword(w) {
                if self.peek_at(1) == &Tok::LParen {
                    self.bump();
                    self.bump();
                    let distinct = self.eat_keyword("DISTINCT");
                    let arg = self.column_ref()?;
                    if !self.eat(&Tok::RParen) {
                        return self.error(&["')'"]);
                    }
                    return Ok(SelectItem::Aggregate {
                        func,
                        arg,
                        distinct,
                    });
                }
            }
        }
        Ok(SelectItem::Column(self.column_ref()?))
    }

    fn column_ref(&mut self) -> Result<ColumnRef, ParseError> {
        let first = self.ident("column")?;
        if self.eat(&Tok::Dot) {
            let column = self.ident("column")?;
            Ok(ColumnRef::qualified(first, column))
        } else {
            Ok(ColumnRef::bare(first))
        }
    }

    fn table_ref(&mut self) -> Result<TableRef, ParseError> {
        let name = self.ident("table")?;
        // AS is optional
        let alias = if self.eat_keyword("AS") || self.at_ident() {
            Some(self.ident("alias")?)
        } else {
            None
        };
        Ok(TableRef { name, alias })
    }

    fn or_predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut left = self.and_predicate()?;
        while self.eat_keyword("OR") {
            let right = self.and_predicate()?;
            left = Predicate::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut left = self.atom_predicate()?;
        while self.eat_keyword("AND") {
            let right = self.atom_predicate()?;
            left = Predicate::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn atom_predicate(&mut self) -> Result<Predicate, ParseError> {
        if self.eat(&Tok::LParen) {
            let inner = self.or_predicate()?;
            if !self.eat(&Tok::RParen) {
                return self.error(&["')'"]);
            }
            return Ok(inner);
        }
        let column = self.column_ref()?;
        if self.eat_keyword("IS") {
            self.expect_keyword("NOT")?;
            self.expect_keyword("NULL")?;
            return Ok(Predicate::IsNotNull(column));
        }
        let op = match &self.peek().tok {
            Tok::Op(op) => *op,
            Tok::Word(w) if w.eq_ignore_ascii_case("LIKE") => CompareOp::Like,
            _ => return self.error(&["comparison operator", "IS NOT NULL"]),
        };
        self.bump();
        let value = self.literal()?;
        Ok(Predicate::Compare { column, op, value })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        let tok = self.peek().tok.clone();
        let lit = match tok {
            Tok::Str(s) => Literal::Str(s),
            Tok::Int(i) => Literal::Int(i),
            Tok::Float(f) => Literal::Float(f),
            Tok::Word(w) if w.eq_ignore_ascii_case("DATE") => {
                if let Tok::Str(s) = self.peek_at(1).clone() {
                    match parse_date(&s) {
                        Some(d) => {
                            self.bump();
                            Literal::Date(d)
                        }
                        None => {
                            self.bump();
                            return self.error(&["date string 'YYYY-MM-DD'"]);
                        }
                    }
                } else {
                    self.bump();
                    return self.error(&["date string"]);
                }
            }
            _ => return self.error(&["literal"]),
        };
        self.bump();
        Ok(lit)
    }

    fn order_by(&mut self) -> Result<OrderBy, ParseError> {
        let pseudo = match &self.peek().tok {
            Tok::Word(w) if self.peek_at(1) != &Tok::Dot && self.peek_at(1) != &Tok::LParen => {
                if w.eq_ignore_ascii_case("X") {
                    Some(OrderTarget::X)
                } else if w.eq_ignore_ascii_case("Y") {
                    Some(OrderTarget::Y)
                } else {
                    None
                }
            }
            _ => None,
        };
        let target = match pseudo {
            Some(t) => {
                self.bump();
                t
            }
            None => OrderTarget::Item(self.select_item()?),
        };
        let direction = if self.eat_keyword("DESC") {
            SortDirection::Desc
        } else {
            self.eat_keyword("ASC");
            SortDirection::Asc
        };
        Ok(OrderBy { target, direction })
    }

    fn interval(&mut self) -> Result<BinInterval, ParseError> {
        for interval in BinInterval::ALL {
            if self.eat_keyword(interval.keyword()) {
                return Ok(interval);
            }
        }
        self.error(&["YEAR", "MONTH", "DAY", "WEEKDAY"])
    }
}

/// Parses one VQL sentence. A string may also open with a backtick, so the
/// `` `Psychology' `` quoting style is accepted.
pub fn parse_vql(text: &str) -> Result<VqlQuery, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, at: 0 };
    parser.query()
}
