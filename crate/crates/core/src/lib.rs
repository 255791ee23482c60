//! Semantic decision support for liver-disease diagnosis.
//!
//! The crate is organized bottom-up:
//!
//! * [`store`]: RDF graph with SPO/POS/OSP indexes and N-Triples I/O.
//! * [`ingest`]: lab-data CSV to encoded records to graph.
//! * [`dtree`]: CART training, cross-validation, path extraction.
//! * [`rules`]: SWRL-lite language and a semi-naive forward-chaining reasoner.
//! * [`sparql`]: SELECT subset with basic graph patterns, FILTER and ORDER BY.
//! * [`stream`]: batched event detection with hot rule deployment.
//! * [`ontology`]: BFO-lite schema, consistency checks, ontology metrics.
//! * [`dss`]: diagnosis sessions, report parsing and treatment planning.

pub mod dss;
pub mod dtree;
pub mod ingest;
pub mod ontology;
pub mod rules;
pub mod sparql;
pub mod store;
pub mod stream;
pub mod vocab;
