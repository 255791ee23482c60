//! N-Triples reader and canonical writer (no blank nodes, no language tags).

use super::term::{Datatype, Iri, Literal, Term, Triple};
use super::{Graph, StoreError};

pub fn parse_ntriples(text: &str) -> Result<Graph, StoreError> {
    let mut graph = Graph::new();
    for (idx, line) in text.lines().enumerate() {
        let mut cursor = Cursor::new(line, idx + 1);
        cursor.skip_ws();
        if cursor.at_end() || cursor.peek() == Some('#') {
            continue;
        }
        graph.insert(cursor.statement()?);
    }
    Ok(graph)
}

/// Canonical serialization: one statement per line, lines sorted, so equal
/// graphs serialize byte-identically.
pub fn serialize_ntriples(graph: &Graph) -> String {
    let mut lines: Vec<String> = graph.iter().map(|t| t.to_string()).collect();
    lines.sort();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn err(&self, message: impl Into<String>) -> StoreError {
        self.err_at(self.pos, message)
    }

    fn err_at(&self, pos: usize, message: impl Into<String>) -> StoreError {
        StoreError::Parse {
            line: self.line,
            column: pos + 1,
            message: message.into(),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, want: char) -> Result<(), StoreError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => Err(self.err(format!("expected '{want}', found '{c}'"))),
            None => Err(self.err(format!("expected '{want}', found end of line"))),
        }
    }

    fn statement(&mut self) -> Result<Triple, StoreError> {
        let subject = self.iri_term("subject")?;
        self.skip_ws();
        let predicate = self.iri_term("predicate")?;
        self.skip_ws();
        let object = match self.peek() {
            Some('<') => Term::Iri(self.iri()?),
            Some('"') => Term::Literal(self.literal()?),
            Some('_') => return Err(self.err("blank nodes are not supported")),
            Some(c) => return Err(self.err(format!("unexpected '{c}' in object position"))),
            None => return Err(self.err("missing object")),
        };
        self.skip_ws();
        if self.peek() != Some('.') {
            return Err(self.err("missing final '.'"));
        }
        self.pos += 1;
        self.skip_ws();
        match self.peek() {
            None | Some('#') => Ok(Triple {
                subject,
                predicate,
                object,
            }),
            Some(c) => Err(self.err(format!("trailing '{c}' after statement"))),
        }
    }

    fn iri_term(&mut self, what: &str) -> Result<Iri, StoreError> {
        match self.peek() {
            Some('<') => self.iri(),
            Some('_') => Err(self.err("blank nodes are not supported")),
            _ => Err(self.err(format!("expected IRI in {what} position"))),
        }
    }

    fn iri(&mut self) -> Result<Iri, StoreError> {
        let start = self.pos;
        self.expect('<')?;
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err_at(start, "unterminated IRI")),
                Some('>') => break,
                Some('\\') => value.push(self.unicode_escape()?),
                Some(c) => value.push(c),
            }
        }
        Iri::new(&value).map_err(|e| self.err_at(start, e.to_string()))
    }

    fn unicode_escape(&mut self) -> Result<char, StoreError> {
        let width = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.err("bad escape sequence")),
        };
        let mut code = 0u32;
        for _ in 0..width {
            let digit = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.err("bad unicode escape"))?;
            code = code * 16 + digit;
        }
        char::from_u32(code).ok_or_else(|| self.err("escape is not a scalar value"))
    }

    fn literal(&mut self) -> Result<Literal, StoreError> {
        let start = self.pos;
        self.expect('"')?;
        let mut lexical = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err_at(start, "unterminated literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u' | 'U') => {
                            lexical.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.err("bad escape sequence")),
                    };
                    self.pos += 1;
                    lexical.push(c);
                }
                Some(c) => lexical.push(c),
            }
        }
        let datatype = match self.peek() {
            Some('^') => {
                self.pos += 1;
                self.expect('^')?;
                let dt_start = self.pos;
                let iri = self.iri()?;
                Datatype::from_iri(iri.as_str())
                    .ok_or_else(|| self.err_at(dt_start, format!("unsupported datatype {iri}")))?
            }
            Some('@') => return Err(self.err("language-tagged literals are not supported")),
            _ => Datatype::String,
        };
        Literal::new(&lexical, datatype).map_err(|e| self.err_at(start, e.to_string()))
    }
}
