//! BFO-lite schema, consistency checks and ontology metrics.
//!
//! Class and property names are local names in the ontology namespace
//! ([`crate::vocab::ONTO`]). A schema always starts from the nine-class
//! skeleton: `Continuant` and `Occurrent` with their standard children.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::store::{rdf_type, Graph, Iri, Term};
use crate::vocab::ONTO;

pub const LIVER_SCHEMA: &str = include_str!("../ontology/liver.schema");

const SKELETON: [(&str, Option<&str>); 9] = [
    ("Continuant", None),
    ("Occurrent", None),
    ("IndependentContinuant", Some("Continuant")),
    ("GenericallyDependentContinuant", Some("Continuant")),
    ("SpecificallyDependentContinuant", Some("Continuant")),
    ("Process", Some("Occurrent")),
    ("ProcessBoundary", Some("Occurrent")),
    ("SpatiotemporalRegion", Some("Occurrent")),
    ("TemporalRegion", Some("Occurrent")),
];

pub const ROOTS: [&str; 2] = ["Continuant", "Occurrent"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: class {class} has unknown parent {parent}")]
    UnknownParent {
        line: usize,
        class: String,
        parent: String,
    },
    #[error("line {line}: unknown class {name}")]
    UnknownClass { line: usize, name: String },
    #[error("subclass cycle through {class}")]
    Cycle { class: String },
    #[error("line {line}: root class {class} cannot have a parent")]
    RootWithParent { line: usize, class: String },
    #[error("ontology has no classes")]
    NoClasses,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ObjectProperty {
    pub domain: Option<String>,
    pub range: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    /// Class name to its direct parents.
    pub classes: BTreeMap<String, BTreeSet<String>>,
    pub object_properties: BTreeMap<String, ObjectProperty>,
    /// Data property name to its domain.
    pub data_properties: BTreeMap<String, Option<String>>,
    pub disjoint_sets: Vec<BTreeSet<String>>,
    pub annotations: BTreeMap<String, String>,
}

impl Default for Schema {
    fn default() -> Self {
        Self::skeleton()
    }
}

impl Schema {
    /// The nine built-in classes with default disjointness.
    pub fn skeleton() -> Self {
        let classes = SKELETON
            .iter()
            .map(|(c, p)| (c.to_string(), p.iter().map(|p| p.to_string()).collect()))
            .collect();
        let set = |names: &[&str]| names.iter().map(|n| n.to_string()).collect();
        Schema {
            classes,
            object_properties: BTreeMap::new(),
            data_properties: BTreeMap::new(),
            disjoint_sets: vec![
                set(&["Continuant", "Occurrent"]),
                set(&[
                    "IndependentContinuant",
                    "GenericallyDependentContinuant",
                    "SpecificallyDependentContinuant",
                ]),
            ],
            annotations: BTreeMap::new(),
        }
    }

    /// The liver-disease schema shipped with the crate.
    pub fn liver() -> Self {
        load_schema(LIVER_SCHEMA).expect("bundled schema is valid")
    }

    pub fn subclass_edges(&self) -> usize {
        self.classes.values().map(BTreeSet::len).sum()
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    /// The class and all its superclasses.
    pub fn ancestors(&self, class: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![class.to_string()];
        while let Some(c) = stack.pop() {
            if let Some(parents) = self.classes.get(&c) {
                stack.extend(parents.iter().filter(|p| !out.contains(*p)).cloned());
            }
            out.insert(c);
        }
        out
    }

    pub fn is_subclass_of(&self, class: &str, ancestor: &str) -> bool {
        self.ancestors(class).contains(ancestor)
    }

    /// Members of `set` reached from `class` through its ancestors.
    fn disjoint_hits(&self, set: &BTreeSet<String>, class: &str) -> BTreeSet<String> {
        self.ancestors(class).intersection(set).cloned().collect()
    }

    /// Two classes are disjoint when their ancestor closures meet two
    /// different members of one disjoint set.
    pub fn disjoint(&self, a: &str, b: &str) -> bool {
        self.disjoint_sets.iter().any(|set| {
            let ha = self.disjoint_hits(set, a);
            let hb = self.disjoint_hits(set, b);
            ha.iter().any(|x| hb.iter().any(|y| x != y))
        })
    }

    pub fn check_acyclic(&self) -> Result<(), SchemaError> {
        // Colors: absent = unvisited, false = on stack, true = done.
        fn visit(
            schema: &Schema,
            c: &str,
            color: &mut BTreeMap<String, bool>,
        ) -> Result<(), SchemaError> {
            match color.get(c) {
                Some(true) => return Ok(()),
                Some(false) => return Err(SchemaError::Cycle { class: c.into() }),
                None => {}
            }
            color.insert(c.into(), false);
            for p in schema.classes.get(c).into_iter().flatten() {
                visit(schema, p, color)?;
            }
            color.insert(c.into(), true);
            Ok(())
        }
        let mut color = BTreeMap::new();
        for c in self.classes.keys() {
            visit(self, c, &mut color)?;
        }
        Ok(())
    }
}

/// Parses a schema file on top of the skeleton. Lines:
///
/// ```text
/// class <Name> sub <Parent>
/// objprop <name> [domain <Class>] [range <Class>]
/// dataprop <name> [domain <Class>]
/// disjoint <A> <B> ...
/// annotation <key> <value...>
/// ```
///
/// Parents may be declared later in the file.
pub fn load_schema(text: &str) -> Result<Schema, SchemaError> {
    let mut schema = Schema::skeleton();
    let mut pending_parents = Vec::new();
    let mut pending_refs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let syntax = |message: &str| SchemaError::Syntax {
            line,
            message: message.to_string(),
        };
        match words[0] {
            "class" => {
                // Every class needs a parent so the hierarchy keeps its two roots.
                let (name, parent) = match words.as_slice() {
                    [_, name, "sub", parent] => (*name, Some(*parent)),
                    _ => return Err(syntax("expected `class <Name> sub <Parent>`")),
                };
                let parents = schema.classes.entry(name.to_string()).or_default();
                if let Some(parent) = parent {
                    if ROOTS.contains(&name) {
                        return Err(SchemaError::RootWithParent {
                            line,
                            class: name.into(),
                        });
                    }
                    parents.insert(parent.to_string());
                    pending_parents.push((line, name.to_string(), parent.to_string()));
                }
            }
            "objprop" | "dataprop" => {
                let Some(name) = words.get(1) else {
                    return Err(syntax("missing property name"));
                };
                let mut domain = None;
                let mut range = None;
                for pair in words[2..].chunks(2) {
                    match pair {
                        ["domain", c] => domain = Some(c.to_string()),
                        ["range", c] if words[0] == "objprop" => range = Some(c.to_string()),
                        _ => return Err(syntax("expected `domain <Class>` or `range <Class>`")),
                    }
                }
                pending_refs.extend(domain.iter().chain(range.iter()).map(|c| (line, c.clone())));
                if words[0] == "objprop" {
                    schema
                        .object_properties
                        .insert(name.to_string(), ObjectProperty { domain, range });
                } else {
                    schema.data_properties.insert(name.to_string(), domain);
                }
            }
            "disjoint" => {
                if words.len() < 3 {
                    return Err(syntax("disjoint needs at least two classes"));
                }
                let set: BTreeSet<String> = words[1..].iter().map(|w| w.to_string()).collect();
                pending_refs.extend(set.iter().map(|c| (line, c.clone())));
                schema.disjoint_sets.push(set);
            }
            "annotation" => {
                if words.len() < 3 {
                    return Err(syntax("expected `annotation <key> <value>`"));
                }
                let value = content
                    .splitn(3, char::is_whitespace)
                    .nth(2)
                    .unwrap_or("")
                    .trim();
                schema
                    .annotations
                    .insert(words[1].to_string(), value.to_string());
            }
            other => return Err(syntax(&format!("unknown directive `{other}`"))),
        }
    }
    for (line, class, parent) in pending_parents {
        if !schema.has_class(&parent) {
            return Err(SchemaError::UnknownParent {
                line,
                class,
                parent,
            });
        }
    }
    for (line, name) in pending_refs {
        if !schema.has_class(&name) {
            return Err(SchemaError::UnknownClass { line, name });
        }
    }
    schema.check_acyclic()?;
    Ok(schema)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// An individual asserted into classes from one disjoint set.
    Disjoint {
        individual: Iri,
        first: String,
        second: String,
    },
    /// A property used on a subject whose asserted type is disjoint with
    /// the property's domain.
    Domain {
        individual: Iri,
        property: String,
        domain: String,
        asserted: String,
    },
}

fn local_name(iri: &Iri) -> Option<&str> {
    iri.as_str().strip_prefix(ONTO)
}

/// Asserted schema classes per individual.
fn asserted_types(schema: &Schema, graph: &Graph) -> BTreeMap<Iri, BTreeSet<String>> {
    let mut out: BTreeMap<Iri, BTreeSet<String>> = BTreeMap::new();
    for t in graph.matches(None, Some(&rdf_type()), None) {
        if let Term::Iri(class) = &t.object {
            if let Some(name) = local_name(class).filter(|n| schema.has_class(n)) {
                out.entry(t.subject.clone())
                    .or_default()
                    .insert(name.to_string());
            }
        }
    }
    out
}

/// Disjointness and domain violations. Domains are read open-world: an
/// untyped subject is never a violation, only one asserted into a class
/// disjoint with the domain. This keeps the result monotone in the graph.
pub fn check_consistency(schema: &Schema, graph: &Graph) -> Vec<Violation> {
    let types = asserted_types(schema, graph);
    let mut out = BTreeSet::new();
    // Every offending pair and every offending asserted class is reported,
    // so adding triples can only add violations.
    for (individual, classes) in &types {
        let classes: Vec<&String> = classes.iter().collect();
        for set in &schema.disjoint_sets {
            let hits: Vec<BTreeSet<String>> =
                classes.iter().map(|c| schema.disjoint_hits(set, c)).collect();
            for i in 0..classes.len() {
                for j in i..classes.len() {
                    if hits[i].iter().any(|x| hits[j].iter().any(|y| x != y)) {
                        out.insert(Violation::Disjoint {
                            individual: individual.clone(),
                            first: classes[i].clone(),
                            second: classes[j].clone(),
                        });
                    }
                }
            }
        }
    }
    let domains = schema
        .object_properties
        .iter()
        .filter_map(|(p, op)| op.domain.as_ref().map(|d| (p, d)))
        .chain(
            schema
                .data_properties
                .iter()
                .filter_map(|(p, d)| d.as_ref().map(|d| (p, d))),
        );
    for (property, domain) in domains {
        let piri = Iri::new(format!("{ONTO}{property}")).expect("schema names form valid IRIs");
        for t in graph.matches(None, Some(&piri), None) {
            let Some(classes) = types.get(&t.subject) else {
                continue;
            };
            for asserted in classes.iter().filter(|c| schema.disjoint(c, domain)) {
                out.insert(Violation::Domain {
                    individual: t.subject.clone(),
                    property: property.clone(),
                    domain: domain.clone(),
                    asserted: asserted.clone(),
                });
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MetricCounts {
    pub classes: usize,
    pub object_properties: usize,
    pub data_properties: usize,
    pub subclass_of: usize,
    pub individuals: usize,
    pub classes_with_instance: usize,
}

impl MetricCounts {
    pub fn properties(&self) -> usize {
        self.object_properties + self.data_properties
    }

    /// Counts of the published liver ontology.
    pub fn published() -> Self {
        MetricCounts {
            classes: 125,
            object_properties: 27,
            data_properties: 28,
            subclass_of: 12,
            individuals: 615,
            classes_with_instance: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OntologyMetrics {
    #[serde(rename = "Attribute Richness")]
    pub attribute_richness: f64,
    #[serde(rename = "Class Richness")]
    pub class_richness: f64,
    #[serde(rename = "Average Population")]
    pub average_population: f64,
    #[serde(rename = "Relationship Richness")]
    pub relationship_richness: f64,
    pub counts: MetricCounts,
}

impl OntologyMetrics {
    pub fn from_counts(counts: MetricCounts) -> Result<Self, SchemaError> {
        if counts.classes == 0 {
            return Err(SchemaError::NoClasses);
        }
        let classes = counts.classes as f64;
        let props = counts.properties();
        let rr_den = counts.subclass_of + props;
        Ok(OntologyMetrics {
            attribute_richness: counts.data_properties as f64 / classes,
            class_richness: counts.classes_with_instance as f64 / classes,
            average_population: counts.individuals as f64 / classes,
            relationship_richness: if rr_den == 0 {
                0.0
            } else {
                props as f64 / rr_den as f64
            },
            counts,
        })
    }
}

/// Counts are taken from the schema plus direct `rdf:type` assertions in
/// the graph: an individual is any subject with a type assertion, and a
/// class has an instance only if something is typed into it directly.
pub fn count(schema: &Schema, graph: &Graph) -> MetricCounts {
    let typed = graph.matches(None, Some(&rdf_type()), None);
    let individuals: BTreeSet<&Iri> = typed.iter().map(|t| &t.subject).collect();
    let with_instance: BTreeSet<&str> = typed
        .iter()
        .filter_map(|t| t.object.as_iri().and_then(local_name))
        .filter(|n| schema.has_class(n))
        .collect();
    MetricCounts {
        classes: schema.classes.len(),
        object_properties: schema.object_properties.len(),
        data_properties: schema.data_properties.len(),
        subclass_of: schema.subclass_edges(),
        individuals: individuals.len(),
        classes_with_instance: with_instance.len(),
    }
}

pub fn compute_metrics(schema: &Schema, graph: &Graph) -> Result<OntologyMetrics, SchemaError> {
    OntologyMetrics::from_counts(count(schema, graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{iri, Literal, Triple};

    fn onto(name: &str) -> Iri {
        iri(&format!("{ONTO}{name}"))
    }

    fn typed(subject: &str, class: &str) -> Triple {
        Triple::new(onto(subject), rdf_type(), onto(class))
    }

    #[test]
    fn empty_file_gives_skeleton() {
        let s = load_schema("").unwrap();
        assert_eq!(s.classes.len(), 9);
        assert_eq!(s.subclass_edges(), 7);
        let roots: Vec<&String> = s
            .classes
            .iter()
            .filter(|(_, p)| p.is_empty())
            .map(|(c, _)| c)
            .collect();
        assert_eq!(roots, ["Continuant", "Occurrent"]);
    }

    #[test]
    fn liver_schema_places_domain_classes() {
        let s = Schema::liver();
        assert!(s.is_subclass_of("Symptoms", "GenericallyDependentContinuant"));
        assert!(s.is_subclass_of("Hospitals", "IndependentContinuant"));
        assert!(s.is_subclass_of("Patient", "SpecificallyDependentContinuant"));
        assert!(s.is_subclass_of("DiagnosticProcedure", "Occurrent"));
        assert!(s.is_subclass_of("MedicalObservation", "SpatiotemporalRegion"));
        assert_eq!(s.annotations["label"], "Liver disease ontology");
        assert_eq!(
            s.object_properties["has_Symptom"].domain.as_deref(),
            Some("Patient")
        );
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            load_schema("class X sub X"),
            Err(SchemaError::Cycle { .. })
        ));
        assert!(matches!(
            load_schema("class A sub B\nclass B sub A"),
            Err(SchemaError::UnknownParent { .. }) | Err(SchemaError::Cycle { .. })
        ));
        assert!(matches!(
            load_schema("class A sub Nowhere"),
            Err(SchemaError::UnknownParent { line: 1, .. })
        ));
        assert!(matches!(
            load_schema("class Occurrent sub Process"),
            Err(SchemaError::RootWithParent { .. })
        ));
        assert!(matches!(
            load_schema("dataprop p domain Ghost"),
            Err(SchemaError::UnknownClass { .. })
        ));
        assert!(matches!(
            load_schema("frobnicate"),
            Err(SchemaError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn forward_parent_reference_is_allowed() {
        let s = load_schema("class B sub A\nclass A sub Process").unwrap();
        assert!(s.is_subclass_of("B", "Occurrent"));
    }

    #[test]
    fn patient_and_procedure_is_one_disjointness_violation() {
        let s = Schema::liver();
        let g: Graph = [typed("p1", "Patient"), typed("p1", "DiagnosticProcedure")]
            .into_iter()
            .collect();
        let v = check_consistency(&s, &g);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(v[0], Violation::Disjoint { .. }));
        assert!(check_consistency(&s, &Graph::new()).is_empty());
    }

    #[test]
    fn symptom_on_non_patient_is_domain_violation() {
        let s = Schema::liver();
        let g: Graph = [
            typed("h1", "Hospitals"),
            Triple::new(onto("h1"), onto("has_Symptom"), onto("fatigue")),
        ]
        .into_iter()
        .collect();
        let v = check_consistency(&s, &g);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(&v[0], Violation::Domain { property, .. } if property == "has_Symptom"));

        let ok: Graph = [
            typed("p1", "Patient"),
            Triple::new(onto("p1"), onto("has_Symptom"), onto("fatigue")),
            Triple::new(onto("p1"), onto("hasValueALT"), Literal::double(9.0)),
        ]
        .into_iter()
        .collect();
        assert!(check_consistency(&s, &ok).is_empty());
    }

    #[test]
    fn metrics_on_published_counts() {
        let m = OntologyMetrics::from_counts(MetricCounts::published()).unwrap();
        assert!((m.relationship_richness - 55.0 / 67.0).abs() < 1e-12);
        assert!((m.average_population - 4.92).abs() < 1e-12);
        assert!((m.attribute_richness - 28.0 / 125.0).abs() < 1e-12);
        let json = serde_json::to_value(m).unwrap();
        assert!(json.get("Relationship Richness").is_some());
    }

    #[test]
    fn metrics_from_schema_and_graph() {
        let s = load_schema("class Patient sub SpecificallyDependentContinuant").unwrap();
        let g: Graph = [typed("p1", "Patient"), typed("p2", "Patient")]
            .into_iter()
            .collect();
        let m = compute_metrics(&s, &g).unwrap();
        assert_eq!(m.attribute_richness, 0.0);
        assert_eq!(m.counts.individuals, 2);
        assert_eq!(m.counts.classes_with_instance, 1);
        assert!((m.class_richness - 0.1).abs() < 1e-12);
        assert!(OntologyMetrics::from_counts(MetricCounts::default()).is_err());
    }
}
