//! Namespaces and well-known IRIs shared by every layer.

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const SWRLB: &str = "http://www.w3.org/2003/11/swrlb#";
/// Predicate namespace used by the tabular ingest (`ns1:` in the queries).
pub const SCHEMA: &str = "http://schema.org/";
/// Namespace of the liver-disease ontology: classes, properties and the
/// symbolic constants that appear in rule heads.
pub const ONTO: &str = "http://example.org/liver#";
/// Default base for patient record UIDs.
pub const RECORD_BASE: &str = "http://example.org/hcv/";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

/// Prefixes understood by the rule and schema languages.
pub const PREFIXES: &[(&str, &str)] = &[
    ("rdf", RDF),
    ("rdfs", RDFS),
    ("owl", OWL),
    ("xsd", XSD),
    ("swrlb", SWRLB),
    ("schema", SCHEMA),
    ("ns1", SCHEMA),
    ("onto", ONTO),
];

pub fn prefix_iri(prefix: &str) -> Option<&'static str> {
    PREFIXES
        .iter()
        .find(|(p, _)| *p == prefix)
        .map(|(_, iri)| *iri)
}

/// Expands a bare or prefixed name to a full IRI string. Bare names live in
/// the ontology namespace.
pub fn expand_name(name: &str) -> Option<String> {
    match name.split_once(':') {
        Some((prefix, local)) => prefix_iri(prefix).map(|ns| format!("{ns}{local}")),
        None => Some(format!("{ONTO}{name}")),
    }
}

/// Inverse of [`expand_name`] for display: ontology IRIs lose their
/// namespace, other known namespaces get their prefix.
pub fn compact_iri(iri: &str) -> String {
    if let Some(local) = iri.strip_prefix(ONTO) {
        return local.to_string();
    }
    for (prefix, ns) in PREFIXES {
        if *prefix == "ns1" || *prefix == "onto" {
            continue;
        }
        if let Some(local) = iri.strip_prefix(ns) {
            return format!("{prefix}:{local}");
        }
    }
    format!("<{iri}>")
}
