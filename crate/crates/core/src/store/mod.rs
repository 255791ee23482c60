//! In-memory RDF graph with typed literals and N-Triples I/O.

mod graph;
mod ntriples;
mod term;

pub use graph::Graph;
pub use ntriples::{parse_ntriples, serialize_ntriples};
pub use term::{Datatype, Iri, Literal, Term, Triple};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("invalid IRI {iri:?}: {reason}")]
    InvalidIri { iri: String, reason: String },
    #[error("malformed literal {lexical:?} for datatype <{datatype}>")]
    MalformedLiteral { lexical: String, datatype: String },
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Convenience constructor for IRIs known to be valid at compile time.
pub fn iri(value: &str) -> Iri {
    Iri::new(value).unwrap_or_else(|e| panic!("{e}"))
}

pub fn rdf_type() -> Iri {
    iri(crate::vocab::RDF_TYPE)
}
