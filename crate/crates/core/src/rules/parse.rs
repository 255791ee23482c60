use super::{Arg, Atom, BuiltinOp, Rule, RuleError};
use crate::store::{Datatype, Iri, Literal};
use crate::vocab::{expand_name, SWRLB};

/// Parses a single rule. An optional `name:` prefix (name, colon,
/// whitespace) sets the rule name; otherwise it is `r1`.
pub fn parse_rule(text: &str) -> Result<Rule, RuleError> {
    parse_line(text, 1, "r1".to_string())
}

/// Parses a rule file: one rule per line, `#` comments, blank lines ignored.
/// Unnamed rules are called `r<index>` (1-based over rules in the file).
pub fn parse_rules(text: &str) -> Result<Vec<Rule>, RuleError> {
    let mut rules = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let default = format!("r{}", rules.len() + 1);
        rules.push(parse_line(line, idx + 1, default)?);
    }
    Ok(rules)
}

fn parse_line(text: &str, line: usize, default_name: String) -> Result<Rule, RuleError> {
    let mut p = Parser {
        chars: text.chars().collect(),
        pos: 0,
        line,
    };
    p.skip_ws();
    let name = p.rule_name().unwrap_or(default_name);
    let body = p.atoms()?;
    p.skip_ws();
    if p.eat_str("->") || p.eat_str("→") {
    } else {
        return Err(p.err("expected '->' between body and head"));
    }
    let head = p.atoms()?;
    p.skip_ws();
    if p.peek() == Some('#') {
        p.pos = p.chars.len();
    }
    if !p.at_end() {
        return Err(p.err("unexpected text after rule head"));
    }
    let rule = Rule { name, body, head };
    rule.validate()?;
    Ok(rule)
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_') && chars.all(is_name_char)
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.')
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> RuleError {
        self.err_at(self.pos, message)
    }

    fn err_at(&self, pos: usize, message: impl Into<String>) -> RuleError {
        RuleError::Syntax {
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

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_str(&mut self, s: &str) -> bool {
        let want: Vec<char> = s.chars().collect();
        if self.chars[self.pos..].starts_with(&want) {
            self.pos += want.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), RuleError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    /// `name:` followed by whitespace. Prefixed names never have whitespace
    /// after the colon, so there is no ambiguity.
    fn rule_name(&mut self) -> Option<String> {
        let start = self.pos;
        while self.peek().is_some_and(is_name_char) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        let colon = self.peek() == Some(':');
        let followed_by_ws = self
            .chars
            .get(self.pos + 1)
            .is_some_and(|c| c.is_whitespace());
        if !name.is_empty() && colon && followed_by_ws {
            self.pos += 1;
            Some(name)
        } else {
            self.pos = start;
            None
        }
    }

    fn atoms(&mut self) -> Result<Vec<Atom>, RuleError> {
        let mut atoms = vec![self.atom()?];
        while self.eat('^') || self.eat('∧') {
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn atom(&mut self) -> Result<Atom, RuleError> {
        self.skip_ws();
        let start = self.pos;
        let (name, iri) = self.name()?;
        self.expect('(')?;
        let mut args = vec![self.arg()?];
        while self.eat(',') {
            args.push(self.arg()?);
        }
        self.expect(')')?;
        if iri.as_str().starts_with(SWRLB) {
            let op =
                BuiltinOp::from_iri(iri.as_str()).ok_or_else(|| RuleError::UnknownBuiltin {
                    line: self.line,
                    column: start + 1,
                    name: name.clone(),
                })?;
            let [left, right]: [Arg; 2] = args
                .try_into()
                .map_err(|_| self.err_at(start, format!("builtin {name} takes two arguments")))?;
            return Ok(Atom::Builtin { op, left, right });
        }
        match <[Arg; 1]>::try_from(args) {
            Ok([arg]) => Ok(Atom::Class { class: iri, arg }),
            Err(args) => match <[Arg; 2]>::try_from(args) {
                Ok([subject, object]) => Ok(Atom::Property {
                    property: iri,
                    subject,
                    object,
                }),
                Err(args) => Err(self.err_at(
                    start,
                    format!(
                        "atom {name} has {} arguments; one or two expected",
                        args.len()
                    ),
                )),
            },
        }
    }

    /// A bare, prefixed or `<iri>` name.
    fn name(&mut self) -> Result<(String, Iri), RuleError> {
        self.skip_ws();
        let start = self.pos;
        if self.peek() == Some('<') {
            let iri = self.iri_ref()?;
            return Ok((format!("<{}>", iri.as_str()), iri));
        }
        let word = self.word();
        if word.is_empty() {
            return Err(self.err("expected a name"));
        }
        let iri = self.expand(&word, start)?;
        Ok((word, iri))
    }

    fn expand(&self, word: &str, start: usize) -> Result<Iri, RuleError> {
        let local_ok = word.split_once(':').map_or(is_identifier(word), |(p, l)| {
            is_identifier(p) && is_identifier(l)
        });
        if !local_ok {
            return Err(self.err_at(start, format!("malformed name {word:?}")));
        }
        let full = expand_name(word)
            .ok_or_else(|| self.err_at(start, format!("undeclared prefix in {word:?}")))?;
        Iri::new(full).map_err(|e| self.err_at(start, e.to_string()))
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| is_name_char(c) || c == ':' || c == '+')
        {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn iri_ref(&mut self) -> Result<Iri, RuleError> {
        let start = self.pos;
        self.pos += 1;
        let mut value = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err_at(start, "unterminated IRI")),
                Some('>') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => {
                    value.push(c);
                    self.pos += 1;
                }
            }
        }
        Iri::new(value).map_err(|e| self.err_at(start, e.to_string()))
    }

    fn arg(&mut self) -> Result<Arg, RuleError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            Some('?') => {
                self.pos += 1;
                let v = self.word();
                if !v.chars().all(|c| c.is_alphanumeric() || c == '_') || v.is_empty() {
                    return Err(self.err_at(start, "malformed variable"));
                }
                Ok(Arg::Var(v))
            }
            Some('"') => self.quoted_literal().map(Arg::Literal),
            Some('<') => self.iri_ref().map(Arg::Iri),
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' => {
                let w = self.word();
                let dt = if w.contains(['.', 'e', 'E']) {
                    Datatype::Double
                } else {
                    Datatype::Integer
                };
                Literal::new(&w, dt)
                    .map(Arg::Literal)
                    .map_err(|_| self.err_at(start, format!("malformed number {w:?}")))
            }
            Some(_) => {
                let w = self.word();
                match w.as_str() {
                    "" => Err(self.err("expected an argument")),
                    "true" => Ok(Arg::Literal(Literal::boolean(true))),
                    "false" => Ok(Arg::Literal(Literal::boolean(false))),
                    _ => self.expand(&w, start).map(Arg::Iri),
                }
            }
            None => Err(self.err("expected an argument")),
        }
    }

    fn quoted_literal(&mut self) -> Result<Literal, RuleError> {
        let start = self.pos;
        self.pos += 1;
        let mut lexical = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err_at(start, "unterminated literal")),
                Some('"') => {
                    self.pos += 1;
                    break;
                }
                Some('\\') => {
                    self.pos += 1;
                    match self.peek() {
                        Some(c @ ('"' | '\\')) => lexical.push(c),
                        _ => return Err(self.err("bad escape sequence")),
                    }
                    self.pos += 1;
                }
                Some(c) => {
                    lexical.push(c);
                    self.pos += 1;
                }
            }
        }
        let datatype = if self.eat_str("^^") {
            let dt_start = self.pos;
            let iri = if self.peek() == Some('<') {
                self.iri_ref()?
            } else {
                let w = self.word();
                self.expand(&w, dt_start)?
            };
            Datatype::from_iri(iri.as_str())
                .ok_or_else(|| self.err_at(dt_start, format!("unsupported datatype {iri}")))?
        } else {
            Datatype::String
        };
        Literal::new(&lexical, datatype).map_err(|e| self.err_at(start, e.to_string()))
    }
}
