//! SWRL-lite: rule AST, text syntax and a forward-chaining reasoner.
//!
//! ```text
//! Patient(?x) ^ hasValueAST(?x, ?ast) ^ swrlb:lessThanOrEqualTo(?ast, "53.05"^^xsd:float)
//!     -> isHealthy(?x, true)
//! ```

pub mod builtin;
mod parse;
mod reason;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::store::{Datatype, Iri, Literal};
use crate::vocab::{compact_iri, ONTO, SWRLB};

pub use parse::{parse_rule, parse_rules};
pub(crate) use reason::ser_bindings;
pub use reason::{
    evaluate_body, explain, firings, infer, naive_infer, Bindings, Comparison, EvalError,
    Explanation, Inference, ProofStep,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown builtin {name}")]
    UnknownBuiltin {
        line: usize,
        column: usize,
        name: String,
    },
    #[error("rule {rule}: builtin {name} is not allowed in the head")]
    BuiltinInHead { rule: String, name: String },
    #[error("rule {rule}: head variable ?{var} does not occur in the body")]
    UnsafeHeadVariable { rule: String, var: String },
    #[error("rule {rule}: builtin variable ?{var} is not bound by any body atom")]
    UnboundBuiltinVariable { rule: String, var: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BuiltinOp {
    LessThan,
    LessThanOrEqualTo,
    GreaterThan,
    GreaterThanOrEqualTo,
    Equal,
}

impl BuiltinOp {
    pub const ALL: [BuiltinOp; 5] = [
        BuiltinOp::LessThan,
        BuiltinOp::LessThanOrEqualTo,
        BuiltinOp::GreaterThan,
        BuiltinOp::GreaterThanOrEqualTo,
        BuiltinOp::Equal,
    ];

    pub fn local_name(self) -> &'static str {
        match self {
            BuiltinOp::LessThan => "lessThan",
            BuiltinOp::LessThanOrEqualTo => "lessThanOrEqualTo",
            BuiltinOp::GreaterThan => "greaterThan",
            BuiltinOp::GreaterThanOrEqualTo => "greaterThanOrEqualTo",
            BuiltinOp::Equal => "equal",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BuiltinOp::LessThan => "<",
            BuiltinOp::LessThanOrEqualTo => "<=",
            BuiltinOp::GreaterThan => ">",
            BuiltinOp::GreaterThanOrEqualTo => ">=",
            BuiltinOp::Equal => "=",
        }
    }

    pub fn from_iri(iri: &str) -> Option<BuiltinOp> {
        let local = iri.strip_prefix(SWRLB)?;
        BuiltinOp::ALL
            .into_iter()
            .find(|op| op.local_name() == local)
    }

    pub fn apply(self, left: f64, right: f64) -> bool {
        match self {
            BuiltinOp::LessThan => left < right,
            BuiltinOp::LessThanOrEqualTo => left <= right,
            BuiltinOp::GreaterThan => left > right,
            BuiltinOp::GreaterThanOrEqualTo => left >= right,
            BuiltinOp::Equal => left == right,
        }
    }
}

/// An atom argument. Barewords in rule text (`every4Weeks`) become IRIs in
/// the ontology namespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    Var(String),
    Literal(Literal),
    Iri(Iri),
}

impl Arg {
    pub fn var(name: &str) -> Arg {
        Arg::Var(name.trim_start_matches('?').to_string())
    }

    pub fn symbol(local: &str) -> Arg {
        Arg::Iri(Iri::new(format!("{ONTO}{local}")).expect("valid symbol"))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Arg::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    /// `Class(arg)`: an `rdf:type` statement.
    Class { class: Iri, arg: Arg },
    /// `property(subject, object)`: data or object property.
    Property {
        property: Iri,
        subject: Arg,
        object: Arg,
    },
    Builtin {
        op: BuiltinOp,
        left: Arg,
        right: Arg,
    },
}

impl Atom {
    pub fn args(&self) -> Vec<&Arg> {
        match self {
            Atom::Class { arg, .. } => vec![arg],
            Atom::Property {
                subject, object, ..
            } => vec![subject, object],
            Atom::Builtin { left, right, .. } => vec![left, right],
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args().into_iter().filter_map(Arg::as_var)
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self, Atom::Builtin { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    pub name: String,
    pub body: Vec<Atom>,
    pub head: Vec<Atom>,
}

impl Rule {
    /// Checks the structural invariants: non-empty body and head, no
    /// builtins in the head, every head and builtin variable bound by a
    /// body class or property atom.
    pub fn validate(&self) -> Result<(), RuleError> {
        let syntax = |message: &str| RuleError::Syntax {
            line: 1,
            column: 1,
            message: format!("rule {}: {message}", self.name),
        };
        if self.body.is_empty() {
            return Err(syntax("empty body"));
        }
        if self.head.is_empty() {
            return Err(syntax("empty head"));
        }
        let bound: BTreeSet<&str> = self
            .body
            .iter()
            .filter(|a| !a.is_builtin())
            .flat_map(Atom::vars)
            .collect();
        for atom in &self.head {
            if let Atom::Builtin { op, .. } = atom {
                return Err(RuleError::BuiltinInHead {
                    rule: self.name.clone(),
                    name: format!("swrlb:{}", op.local_name()),
                });
            }
            if let Some(var) = atom.vars().find(|v| !bound.contains(v)) {
                return Err(RuleError::UnsafeHeadVariable {
                    rule: self.name.clone(),
                    var: var.to_string(),
                });
            }
        }
        for atom in self.body.iter().filter(|a| a.is_builtin()) {
            if let Some(var) = atom.vars().find(|v| !bound.contains(v)) {
                return Err(RuleError::UnboundBuiltinVariable {
                    rule: self.name.clone(),
                    var: var.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Rule text without the `name:` prefix.
    pub fn text(&self) -> String {
        let join = |atoms: &[Atom]| {
            atoms
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(" ^ ")
        };
        format!("{} -> {}", join(&self.body), join(&self.head))
    }
}

/// Canonical text, `name: body -> head`.
pub fn serialize_rule(rule: &Rule) -> String {
    rule.to_string()
}

/// One rule per line.
pub fn serialize_rules(rules: &[Rule]) -> String {
    rules.iter().map(|r| format!("{r}\n")).collect()
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.name, self.text())
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Class { class, arg } => write!(f, "{}({arg})", render_name(class)),
            Atom::Property {
                property,
                subject,
                object,
            } => write!(f, "{}({subject}, {object})", render_name(property)),
            Atom::Builtin { op, left, right } => {
                write!(f, "swrlb:{}({left}, {right})", op.local_name())
            }
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Var(v) => write!(f, "?{v}"),
            Arg::Iri(iri) => f.write_str(&render_name(iri)),
            Arg::Literal(lit) => f.write_str(&render_literal(lit)),
        }
    }
}

pub(crate) fn render_literal(lit: &Literal) -> String {
    let escaped = lit.lexical().replace('\\', "\\\\").replace('"', "\\\"");
    match lit.datatype() {
        Datatype::Integer | Datatype::Boolean => lit.lexical().to_string(),
        Datatype::String => format!("\"{escaped}\""),
        Datatype::Float => format!("\"{escaped}\"^^xsd:float"),
        Datatype::Double => format!("\"{escaped}\"^^xsd:double"),
    }
}

/// Shortest name that parses back to the same IRI.
pub(crate) fn render_name(iri: &Iri) -> String {
    let compact = compact_iri(iri.as_str());
    let local = compact.rsplit(':').next().unwrap_or_default();
    let plain = !compact.starts_with('<')
        && parse::is_identifier(local)
        && !matches!(compact.as_str(), "true" | "false");
    if plain {
        compact
    } else {
        format!("<{}>", iri.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_ops() {
        assert!(BuiltinOp::LessThanOrEqualTo.apply(53.05, 53.05));
        assert!(!BuiltinOp::LessThan.apply(53.05, 53.05));
        assert!(BuiltinOp::GreaterThan.apply(60.0, 53.05));
        assert_eq!(
            BuiltinOp::from_iri(&format!("{SWRLB}greaterThanOrEqualTo")),
            Some(BuiltinOp::GreaterThanOrEqualTo)
        );
        assert_eq!(BuiltinOp::from_iri(&format!("{SWRLB}add")), None);
    }

    #[test]
    fn awkward_names_render_as_iris() {
        let odd = Iri::new(format!("{ONTO}has space%20x/y"))
            .unwrap_or_else(|_| Iri::new(format!("{ONTO}x/y")).unwrap());
        assert!(render_name(&odd).starts_with('<'));
        assert!(render_name(&Iri::new(format!("{ONTO}true")).unwrap()).starts_with('<'));
        assert_eq!(
            render_name(&Iri::new(format!("{ONTO}Patient")).unwrap()),
            "Patient"
        );
    }
}
