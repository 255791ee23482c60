use std::collections::BTreeMap;

use super::{Filter, FilterOp, Order, PatternTerm, Query, QueryError, TriplePattern};
use crate::store::{Datatype, Iri, Literal};
use crate::vocab::RDF_TYPE;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String),
    IriRef(String),
    PName(String, String),
    Str(String, Option<DatatypeRef>),
    Num(String),
    Punct(char),
    Op(String),
}

#[derive(Debug, Clone, PartialEq)]
enum DatatypeRef {
    Iri(String),
    PName(String, String),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn step(chars: &[char], n: usize, i: &mut usize, line: &mut usize, col: &mut usize) {
    for _ in 0..n {
        if chars[*i] == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
        *i += 1;
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>, QueryError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| QueryError::Parse {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        if c.is_whitespace() {
            step(&chars, 1, &mut i, &mut line, &mut col);
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                step(&chars, 1, &mut i, &mut line, &mut col);
            }
            continue;
        }
        let push = |tok: Tok, out: &mut Vec<Spanned>| {
            out.push(Spanned {
                tok,
                line: start_line,
                column: start_col,
            })
        };
        let name_char = |c: char| c.is_alphanumeric() || matches!(c, '_' | '-' | '.');
        let take_while = |from: usize, f: &dyn Fn(char) -> bool| {
            let mut j = from;
            while j < chars.len() && f(chars[j]) {
                j += 1;
            }
            // a trailing '.' ends a statement rather than a name
            while j > from && chars[j - 1] == '.' {
                j -= 1;
            }
            j
        };
        match c {
            '{' | '}' | '(' | ')' | ';' | ',' | '*' | '.' => {
                push(Tok::Punct(c), &mut out);
                step(&chars, 1, &mut i, &mut line, &mut col);
            }
            '?' | '$' => {
                let j = take_while(i + 1, &|c: char| c.is_alphanumeric() || c == '_');
                if j == i + 1 {
                    return Err(err(line, col, "empty variable name".into()));
                }
                push(Tok::Var(chars[i + 1..j].iter().collect()), &mut out);
                step(&chars, j - i, &mut i, &mut line, &mut col);
            }
            '<' => {
                let next = chars.get(i + 1).copied();
                let is_op = match next {
                    Some('=') | None => true,
                    Some(n) => {
                        n.is_whitespace() || n.is_ascii_digit() || n == '?' || n == '-' || n == '$'
                    }
                };
                if is_op {
                    let op = if next == Some('=') { "<=" } else { "<" };
                    push(Tok::Op(op.into()), &mut out);
                    step(&chars, op.len(), &mut i, &mut line, &mut col);
                } else {
                    let mut j = i + 1;
                    while j < chars.len() && chars[j] != '>' && !chars[j].is_whitespace() {
                        j += 1;
                    }
                    if j >= chars.len() || chars[j] != '>' {
                        return Err(err(line, col, "unterminated IRI".into()));
                    }
                    push(Tok::IriRef(chars[i + 1..j].iter().collect()), &mut out);
                    step(&chars, j + 1 - i, &mut i, &mut line, &mut col);
                }
            }
            '>' | '=' | '!' | '&' | '|' => {
                let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
                let op = match two.as_str() {
                    ">=" | "!=" | "&&" | "||" | "==" | "=<" | "=>" | "<>" => two,
                    _ => c.to_string(),
                };
                let n = op.chars().count();
                push(Tok::Op(op), &mut out);
                step(&chars, n, &mut i, &mut line, &mut col);
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut value = String::new();
                loop {
                    match chars.get(j) {
                        None | Some('\n') => {
                            return Err(err(line, col, "unterminated string".into()))
                        }
                        Some(&q) if q == quote => break,
                        Some('\\') => {
                            let e = chars.get(j + 1).copied();
                            value.push(match e {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('r') => '\r',
                                Some(e @ ('"' | '\'' | '\\')) => e,
                                _ => return Err(err(line, col + j - i, "bad escape".into())),
                            });
                            j += 2;
                        }
                        Some(&ch) => {
                            value.push(ch);
                            j += 1;
                        }
                    }
                }
                j += 1;
                let mut dt = None;
                if chars.get(j) == Some(&'^') && chars.get(j + 1) == Some(&'^') {
                    j += 2;
                    if chars.get(j) == Some(&'<') {
                        let mut k = j + 1;
                        while k < chars.len() && chars[k] != '>' {
                            k += 1;
                        }
                        if k >= chars.len() {
                            return Err(err(line, col, "unterminated datatype IRI".into()));
                        }
                        dt = Some(DatatypeRef::Iri(chars[j + 1..k].iter().collect()));
                        j = k + 1;
                    } else {
                        let k = take_while(j, &|c: char| name_char(c) || c == ':');
                        let word: String = chars[j..k].iter().collect();
                        let (p, l) = word
                            .split_once(':')
                            .ok_or_else(|| err(line, col, "datatype must be an IRI".into()))?;
                        dt = Some(DatatypeRef::PName(p.into(), l.into()));
                        j = k;
                    }
                }
                push(Tok::Str(value, dt), &mut out);
                step(&chars, j - i, &mut i, &mut line, &mut col);
            }
            c if c.is_ascii_digit()
                || ((c == '-' || c == '+')
                    && chars
                        .get(i + 1)
                        .is_some_and(|d| d.is_ascii_digit() || *d == '.')) =>
            {
                let mut j = i + 1;
                while j < chars.len()
                    && (chars[j].is_ascii_digit()
                        || chars[j] == '.' && chars.get(j + 1).is_some_and(char::is_ascii_digit)
                        || matches!(chars[j], 'e' | 'E')
                        || (matches!(chars[j], '+' | '-') && matches!(chars[j - 1], 'e' | 'E')))
                {
                    j += 1;
                }
                push(Tok::Num(chars[i..j].iter().collect()), &mut out);
                step(&chars, j - i, &mut i, &mut line, &mut col);
            }
            c if c.is_alphabetic() || c == '_' || c == ':' => {
                let j = take_while(i, &|c: char| name_char(c) || c == ':');
                let word: String = chars[i..j].iter().collect();
                match word.split_once(':') {
                    Some((p, l)) => push(Tok::PName(p.into(), l.into()), &mut out),
                    None => push(Tok::Word(word), &mut out),
                }
                step(&chars, j - i, &mut i, &mut line, &mut col);
            }
            other => return Err(err(line, col, format!("unexpected character '{other}'"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    prefixes: BTreeMap<String, String>,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |s| (s.line, s.column))
    }

    fn err(&self, message: impl Into<String>) -> QueryError {
        let (line, column) = self.here();
        QueryError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|s| s.tok.clone());
        self.pos += 1;
        t
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        let hit = self.is_word(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected {kw}")))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), QueryError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn expand(&self, prefix: &str, local: &str) -> Result<Iri, QueryError> {
        let ns = self
            .prefixes
            .get(prefix)
            .ok_or_else(|| self.err(format!("undeclared prefix '{prefix}:'")))?;
        Iri::new(format!("{ns}{local}")).map_err(|e| self.err(e.to_string()))
    }

    fn iri(&self, value: &str) -> Result<Iri, QueryError> {
        Iri::new(value).map_err(|e| self.err(e.to_string()))
    }

    fn prologue(&mut self) -> Result<(), QueryError> {
        while self.eat_word("PREFIX") {
            let prefix = match self.next() {
                Some(Tok::PName(p, l)) if l.is_empty() => p,
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected 'prefix:' after PREFIX"));
                }
            };
            match self.next() {
                Some(Tok::IriRef(iri)) => {
                    self.prefixes.insert(prefix, iri);
                }
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected <iri> in PREFIX declaration"));
                }
            }
        }
        Ok(())
    }

    fn term(&mut self, allow_literal: bool) -> Result<PatternTerm, QueryError> {
        let start = self.pos;
        let t = match self.next() {
            Some(Tok::Var(v)) => PatternTerm::Var(v),
            Some(Tok::IriRef(i)) => {
                self.pos = start;
                let iri = self.iri(&i)?;
                self.pos += 1;
                PatternTerm::Iri(iri)
            }
            Some(Tok::PName(p, l)) => {
                self.pos = start;
                let iri = self.expand(&p, &l)?;
                self.pos += 1;
                PatternTerm::Iri(iri)
            }
            Some(Tok::Word(w)) if w == "a" => PatternTerm::Iri(self.iri(RDF_TYPE)?),
            Some(Tok::Word(w)) if allow_literal && (w == "true" || w == "false") => {
                PatternTerm::Literal(Literal::boolean(w == "true"))
            }
            Some(Tok::Num(n)) if allow_literal => {
                self.pos = start;
                let lit = self.number(&n)?;
                self.pos += 1;
                PatternTerm::Literal(lit)
            }
            Some(Tok::Str(s, dt)) if allow_literal => {
                self.pos = start;
                let lit = self.string_literal(&s, dt.as_ref())?;
                self.pos += 1;
                PatternTerm::Literal(lit)
            }
            _ => {
                self.pos = start;
                return Err(self.err("expected a variable, IRI or literal"));
            }
        };
        Ok(t)
    }

    fn number(&self, n: &str) -> Result<Literal, QueryError> {
        let dt = if n.contains(['.', 'e', 'E']) {
            Datatype::Double
        } else {
            Datatype::Integer
        };
        Literal::new(n, dt).map_err(|e| self.err(e.to_string()))
    }

    fn string_literal(&self, s: &str, dt: Option<&DatatypeRef>) -> Result<Literal, QueryError> {
        let dt = match dt {
            None => Datatype::String,
            Some(r) => {
                let iri = match r {
                    DatatypeRef::Iri(i) => self.iri(i)?,
                    DatatypeRef::PName(p, l) => self.expand(p, l)?,
                };
                Datatype::from_iri(iri.as_str())
                    .ok_or_else(|| self.err(format!("unsupported datatype {iri}")))?
            }
        };
        Literal::new(s, dt).map_err(|e| self.err(e.to_string()))
    }

    fn starts_term(&self) -> bool {
        match self.peek() {
            Some(Tok::Var(_) | Tok::IriRef(_) | Tok::PName(..) | Tok::Num(_) | Tok::Str(..)) => {
                true
            }
            Some(Tok::Word(w)) => w == "a" || w == "true" || w == "false",
            _ => false,
        }
    }

    fn group(&mut self, q: &mut Query) -> Result<(), QueryError> {
        self.expect_punct('{')?;
        loop {
            if self.eat_punct('}') {
                return Ok(());
            }
            if self.eat_punct('.') {
                continue;
            }
            if self.eat_word("FILTER") {
                self.filter(q)?;
                continue;
            }
            if self.peek().is_none() {
                return Err(self.err("expected '}'"));
            }
            self.triples(q)?;
        }
    }

    fn triples(&mut self, q: &mut Query) -> Result<(), QueryError> {
        let subject = self.term(false)?;
        let mut predicate = self.term(false)?;
        loop {
            let object = self.term(true)?;
            q.patterns.push(TriplePattern {
                s: subject.clone(),
                p: predicate.clone(),
                o: object,
            });
            if self.eat_punct(',') {
                // `p o, p2 o2` (a predicate-object pair after a comma) is
                // read as if `;` had been written
                let save = self.pos;
                let first = self.term(true)?;
                if self.starts_term() {
                    if matches!(first, PatternTerm::Literal(_)) {
                        self.pos = save;
                        return Err(self.err("a literal cannot be a predicate"));
                    }
                    predicate = first;
                    continue;
                }
                self.pos = save;
                continue;
            }
            if self.eat_punct(';') {
                while self.eat_punct(';') {}
                if !self.starts_term() || matches!(self.peek(), Some(Tok::Num(_) | Tok::Str(..))) {
                    return Ok(());
                }
                predicate = self.term(false)?;
                continue;
            }
            return Ok(());
        }
    }

    fn filter(&mut self, q: &mut Query) -> Result<(), QueryError> {
        self.expect_punct('(')?;
        loop {
            q.filters.push(self.comparison()?);
            match self.peek() {
                Some(Tok::Op(op)) if op == "&&" => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        self.expect_punct(')')
    }

    fn comparison(&mut self) -> Result<Filter, QueryError> {
        let (line, column) = self.here();
        let left = self.operand()?;
        let op_pos = self.pos;
        let op = match self.next() {
            Some(Tok::Op(op)) => FilterOp::from_symbol(&op).ok_or_else(|| {
                self.pos = op_pos;
                self.err(format!("unknown operator '{op}'"))
            })?,
            _ => {
                self.pos = op_pos;
                return Err(self.err("expected a comparison operator"));
            }
        };
        let right = self.operand()?;
        let (var, op, value) = match (left, right) {
            (Operand::Var(v), Operand::Num(n)) => (v, op, n),
            (Operand::Num(n), Operand::Var(v)) => (v, op.flipped(), n),
            _ => {
                return Err(QueryError::Parse {
                    line,
                    column,
                    message: "FILTER compares a variable with a number".into(),
                })
            }
        };
        Ok(Filter {
            var,
            op,
            value,
            line,
            column,
        })
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        let start = self.pos;
        match self.next() {
            Some(Tok::Var(v)) => Ok(Operand::Var(v)),
            Some(Tok::Num(n)) => {
                self.pos = start;
                let v = self.number(&n)?.as_f64().unwrap_or_default();
                self.pos += 1;
                Ok(Operand::Num(v))
            }
            Some(Tok::Str(s, dt)) => {
                self.pos = start;
                let lit = self.string_literal(&s, dt.as_ref())?;
                let v = lit
                    .as_f64()
                    .ok_or_else(|| self.err("FILTER constants must be numeric"))?;
                self.pos += 1;
                Ok(Operand::Num(v))
            }
            _ => {
                self.pos = start;
                Err(self.err("expected a variable or number"))
            }
        }
    }
}

enum Operand {
    Var(String),
    Num(f64),
}

pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    let end = text
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(i, l)| (i + 1, l.chars().count() + 1));
    let mut p = Parser {
        toks,
        pos: 0,
        prefixes: BTreeMap::new(),
        end,
    };
    p.prologue()?;
    p.expect_word("SELECT")?;
    p.eat_word("REDUCED");
    let mut q = Query::default();
    let mut select_pos = Vec::new();
    if p.eat_punct('*') {
        q.select_all = true;
    } else {
        while let Some(Tok::Var(v)) = p.peek().cloned() {
            select_pos.push(p.here());
            q.select.push(v);
            p.pos += 1;
        }
        if q.select.is_empty() {
            return Err(p.err("expected variables or '*' after SELECT"));
        }
    }
    p.eat_word("WHERE");
    p.group(&mut q)?;
    let mut order_pos = None;
    if p.eat_word("ORDER") {
        p.expect_word("BY")?;
        let dir = if p.eat_word("ASC") {
            Some(Order::Asc)
        } else if p.eat_word("DESC") {
            Some(Order::Desc)
        } else {
            None
        };
        if dir.is_some() {
            p.expect_punct('(')?;
        }
        order_pos = Some(p.here());
        let var = match p.next() {
            Some(Tok::Var(v)) => v,
            _ => {
                p.pos -= 1;
                return Err(p.err("expected a variable in ORDER BY"));
            }
        };
        if dir.is_some() {
            p.expect_punct(')')?;
        }
        q.order_by = Some((var, dir.unwrap_or(Order::Asc)));
    }
    if p.eat_word("LIMIT") {
        match p.next() {
            Some(Tok::Num(n)) => {
                q.limit = Some(n.parse().map_err(|_| {
                    p.pos -= 1;
                    p.err("LIMIT takes a non-negative integer")
                })?)
            }
            _ => {
                p.pos -= 1;
                return Err(p.err("LIMIT takes a non-negative integer"));
            }
        }
    }
    if p.peek().is_some() {
        return Err(p.err("unexpected trailing input"));
    }
    q.prefixes = p.prefixes;

    let bound = q.pattern_vars();
    let unbound = |v: &str, (line, column): (usize, usize)| QueryError::Validation {
        line,
        column,
        message: format!("?{v} does not occur in any triple pattern"),
    };
    for (v, pos) in q.select.iter().zip(&select_pos) {
        if !bound.contains(v) {
            return Err(unbound(v, *pos));
        }
    }
    for f in &q.filters {
        if !bound.contains(&f.var) {
            return Err(unbound(&f.var, (f.line, f.column)));
        }
    }
    if let (Some((v, _)), Some(pos)) = (&q.order_by, order_pos) {
        if !bound.contains(v) {
            return Err(unbound(v, pos));
        }
    }
    Ok(q)
}
