use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::vocab::XSD;

/// An absolute IRI. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Iri(Arc<str>);

impl Iri {
    pub fn new(value: impl AsRef<str>) -> Result<Self, StoreError> {
        let value = value.as_ref();
        validate_iri(value)?;
        Ok(Iri(Arc::from(value)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn validate_iri(value: &str) -> Result<(), StoreError> {
    let bad = |reason: &str| StoreError::InvalidIri {
        iri: value.to_string(),
        reason: reason.to_string(),
    };
    if value.is_empty() {
        return Err(bad("empty"));
    }
    if let Some(c) = value
        .chars()
        .find(|c| c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(*c))
    {
        return Err(bad(&format!("forbidden character {c:?}")));
    }
    let scheme = value.split(':').next().unwrap_or_default();
    let scheme_ok = value.contains(':')
        && scheme.starts_with(|c: char| c.is_ascii_alphabetic())
        && scheme
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c));
    if !scheme_ok {
        return Err(bad("not absolute (missing scheme)"));
    }
    Ok(())
}

impl fmt::Debug for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl Serialize for Iri {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Iri {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Iri::new(s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Integer,
    Float,
    Double,
    Boolean,
    /// Plain string; serialized without a datatype suffix.
    String,
}

impl Datatype {
    pub fn iri(self) -> String {
        let local = match self {
            Datatype::Integer => "integer",
            Datatype::Float => "float",
            Datatype::Double => "double",
            Datatype::Boolean => "boolean",
            Datatype::String => "string",
        };
        format!("{XSD}{local}")
    }

    pub fn from_iri(iri: &str) -> Option<Self> {
        match iri.strip_prefix(XSD)? {
            "integer" | "int" | "long" => Some(Datatype::Integer),
            "float" => Some(Datatype::Float),
            "double" | "decimal" => Some(Datatype::Double),
            "boolean" => Some(Datatype::Boolean),
            "string" => Some(Datatype::String),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Datatype::Integer | Datatype::Float | Datatype::Double)
    }
}

/// A typed literal. The lexical form is canonicalized on construction, so
/// `"7.10"^^xsd:float` and `"7.1"^^xsd:float` are the same value and
/// structural equality is value equality within a datatype.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    datatype: Datatype,
    lexical: Arc<str>,
}

impl Literal {
    pub fn new(lexical: &str, datatype: Datatype) -> Result<Self, StoreError> {
        let malformed = || StoreError::MalformedLiteral {
            lexical: lexical.to_string(),
            datatype: datatype.iri(),
        };
        let canonical = match datatype {
            Datatype::Integer => lexical
                .trim()
                .parse::<i64>()
                .map_err(|_| malformed())?
                .to_string(),
            Datatype::Float | Datatype::Double => {
                let value = lexical.trim().parse::<f64>().map_err(|_| malformed())?;
                if !value.is_finite() {
                    return Err(malformed());
                }
                format_decimal(value)
            }
            Datatype::Boolean => match lexical {
                "true" | "false" => lexical.to_string(),
                _ => return Err(malformed()),
            },
            Datatype::String => lexical.to_string(),
        };
        Ok(Literal {
            datatype,
            lexical: Arc::from(canonical),
        })
    }

    pub fn integer(value: i64) -> Self {
        Literal {
            datatype: Datatype::Integer,
            lexical: Arc::from(value.to_string()),
        }
    }

    /// Panics on non-finite input.
    pub fn float(value: f64) -> Self {
        assert!(value.is_finite(), "non-finite float literal");
        Literal {
            datatype: Datatype::Float,
            lexical: Arc::from(format_decimal(value)),
        }
    }

    pub fn double(value: f64) -> Self {
        assert!(value.is_finite(), "non-finite double literal");
        Literal {
            datatype: Datatype::Double,
            lexical: Arc::from(format_decimal(value)),
        }
    }

    pub fn boolean(value: bool) -> Self {
        Literal {
            datatype: Datatype::Boolean,
            lexical: Arc::from(if value { "true" } else { "false" }),
        }
    }

    pub fn string(value: impl AsRef<str>) -> Self {
        Literal {
            datatype: Datatype::String,
            lexical: Arc::from(value.as_ref()),
        }
    }

    pub fn datatype(&self) -> Datatype {
        self.datatype
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn as_f64(&self) -> Option<f64> {
        if self.datatype.is_numeric() {
            self.lexical.parse().ok()
        } else {
            None
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match (self.datatype, &*self.lexical) {
            (Datatype::Boolean, "true") => Some(true),
            (Datatype::Boolean, "false") => Some(false),
            _ => None,
        }
    }
}

/// Shortest representation that round-trips, always with a fractional part
/// or exponent ("53.0", "7.1", "1e-7").
fn format_decimal(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:?}")
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", escape_literal(&self.lexical))?;
        if self.datatype != Datatype::String {
            write!(f, "^^<{}>", self.datatype.iri())?;
        }
        Ok(())
    }
}

pub(crate) fn escape_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

/// Object position of a triple.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            Term::Iri(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        self.as_literal().and_then(Literal::as_f64)
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Self {
        Term::Literal(lit)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => fmt::Display::fmt(iri, f),
            Term::Literal(lit) => fmt::Display::fmt(lit, f),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Self {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One N-Triples statement, including the terminating ` .`.
impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
