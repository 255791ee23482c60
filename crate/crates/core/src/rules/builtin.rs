//! Rule sets shipped with the crate.

use super::{parse_rules, Atom, Rule};
use crate::ingest::Lab;
use crate::store::Iri;
use crate::vocab::{ONTO, SCHEMA};

pub const DIAGNOSTIC_RULES: &str = include_str!("../../rules/diagnostic.swl");
pub const GUIDELINE_RULES: &str = include_str!("../../rules/guideline.swl");

/// Lab-threshold rules over `Patient` / `hasValue<LAB>`. The first twelve
/// are tree paths; the last (`healthy_core`) is the broad healthy region.
pub fn diagnostic_rules() -> Vec<Rule> {
    parse_rules(DIAGNOSTIC_RULES).expect("embedded diagnostic rules parse")
}

pub fn guideline_rules() -> Vec<Rule> {
    parse_rules(GUIDELINE_RULES).expect("embedded guideline rules parse")
}

/// The twelve tree-path rules rewritten over the ingest vocabulary
/// (`schema:MedicalRecord`, `schema:<LAB>`), for event detection on
/// record streams.
pub fn event_rules() -> Vec<Rule> {
    diagnostic_rules()
        .iter()
        .take(12)
        .map(to_record_vocab)
        .collect()
}

/// Rewrites `Patient` to `schema:MedicalRecord`, `hasValue<LAB>` to
/// `schema:<LAB>`, `hasAge`/`hasSex` to `schema:Age`/`schema:Sex`.
pub fn to_record_vocab(rule: &Rule) -> Rule {
    let map_class = |iri: &Iri| -> Iri {
        if iri.as_str() == format!("{ONTO}Patient") {
            Iri::new(format!("{SCHEMA}MedicalRecord")).expect("valid IRI")
        } else {
            iri.clone()
        }
    };
    let map_property = |iri: &Iri| -> Iri {
        let Some(local) = iri.as_str().strip_prefix(ONTO) else {
            return iri.clone();
        };
        let target = match local {
            "hasAge" => Some("Age".to_string()),
            "hasSex" => Some("Sex".to_string()),
            _ => local
                .strip_prefix("hasValue")
                .and_then(Lab::from_name)
                .map(|lab| lab.name().to_string()),
        };
        match target {
            Some(t) => Iri::new(format!("{SCHEMA}{t}")).expect("valid IRI"),
            None => iri.clone(),
        }
    };
    let map_atom = |atom: &Atom, in_body: bool| -> Atom {
        match atom {
            Atom::Class { class, arg } => Atom::Class {
                class: map_class(class),
                arg: arg.clone(),
            },
            Atom::Property {
                property,
                subject,
                object,
            } if in_body => Atom::Property {
                property: map_property(property),
                subject: subject.clone(),
                object: object.clone(),
            },
            other => other.clone(),
        }
    };
    Rule {
        name: rule.name.clone(),
        body: rule.body.iter().map(|a| map_atom(a, true)).collect(),
        head: rule.head.iter().map(|a| map_atom(a, false)).collect(),
    }
}
