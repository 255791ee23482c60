//! Diagnosis sessions: labs to rule inference to diagnosis, recommended
//! tests, report ingestion and treatment planning, with template
//! explanations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ingest::{Lab, LabValues};
use crate::rules::{firings, infer, EvalError, ProofStep, Rule};
use crate::store::{rdf_type, Graph, Iri, Literal, Term, Triple};
use crate::vocab::{ONTO, RECORD_BASE};

mod explain;
mod plan;
mod report;
mod session;

pub use explain::{explain_session, explain_with, TextRefiner};
pub use plan::{
    assess_followup, plan_treatment, Dose, Drug, Followup, PlanError, PlanItem, TreatmentPlan,
    BRANCH_COMPENSATED, BRANCH_DECOMPENSATED, BRANCH_NEGATIVE, BRANCH_NON_CIRRHOTIC,
    TREATMENT_WEEKS,
};
pub use report::{parse_report, ChildPugh, ParsedReport, ReportError, ReportFacts, Viremia};
pub use session::{DiagnosisSession, SessionError, SessionState};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecordError {
    #[error("uid must be non-empty and use only letters, digits, '-' or '_': {0:?}")]
    BadUid(String),
    #[error("sex must be 0 or 1, got {0}")]
    BadSex(u8),
    #[error("{lab} is not a finite number")]
    NonFinite { lab: Lab },
    #[error("record {subject} is missing {field}")]
    Missing { subject: String, field: String },
}

/// One patient's demographics and lab panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub uid: String,
    pub age: u32,
    /// 0 = female, 1 = male.
    pub sex: u8,
    pub labs: LabValues,
}

fn onto(local: &str) -> Iri {
    Iri::new(format!("{ONTO}{local}")).expect("ontology names form valid IRIs")
}

fn lab_property(lab: Lab) -> Iri {
    onto(&format!("hasValue{}", lab.name()))
}

impl PatientRecord {
    pub fn validate(&self) -> Result<(), RecordError> {
        let uid_ok = !self.uid.is_empty()
            && self
                .uid
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !uid_ok {
            return Err(RecordError::BadUid(self.uid.clone()));
        }
        if self.sex > 1 {
            return Err(RecordError::BadSex(self.sex));
        }
        for (lab, value) in self.labs.iter() {
            if !value.is_finite() {
                return Err(RecordError::NonFinite { lab });
            }
        }
        Ok(())
    }

    pub fn subject(&self) -> Iri {
        Iri::new(format!("{RECORD_BASE}patient/{}", self.uid)).expect("validated uid")
    }

    /// Triples over the ontology vocabulary (`Patient`, `hasAge`,
    /// `hasSex`, `hasValue<LAB>`), as the diagnostic rules expect.
    pub fn to_graph(&self) -> Graph {
        let s = self.subject();
        let mut g = Graph::new();
        g.insert(Triple::new(s.clone(), rdf_type(), onto("Patient")));
        g.insert(Triple::new(
            s.clone(),
            onto("hasAge"),
            Literal::integer(self.age.into()),
        ));
        g.insert(Triple::new(
            s.clone(),
            onto("hasSex"),
            Literal::integer(self.sex.into()),
        ));
        for (lab, value) in self.labs.iter() {
            g.insert(Triple::new(
                s.clone(),
                lab_property(lab),
                Literal::double(value),
            ));
        }
        g
    }

    /// Reads a record back from [`PatientRecord::to_graph`] output.
    pub fn from_graph(graph: &Graph, uid: &str) -> Result<Self, RecordError> {
        let probe = PatientRecord {
            uid: uid.to_string(),
            age: 0,
            sex: 0,
            labs: LabValues::new([0.0; 10]),
        };
        probe.validate()?;
        let s = probe.subject();
        let number = |p: Iri, field: &str| -> Result<f64, RecordError> {
            graph
                .matches(Some(&s), Some(&p), None)
                .first()
                .and_then(|t| t.object.as_f64())
                .ok_or_else(|| RecordError::Missing {
                    subject: s.to_string(),
                    field: field.to_string(),
                })
        };
        let mut labs = LabValues::new([0.0; 10]);
        for lab in Lab::ALL {
            labs.set(lab, number(lab_property(lab), lab.name())?);
        }
        let record = PatientRecord {
            uid: uid.to_string(),
            age: number(onto("hasAge"), "age")? as u32,
            sex: number(onto("hasSex"), "sex")? as u8,
            labs,
        };
        record.validate()?;
        Ok(record)
    }
}

const HEADS: [Diagnosis; 5] = [
    Diagnosis::Healthy,
    Diagnosis::SignsOnly,
    Diagnosis::HepatitisC,
    Diagnosis::Fibrosis,
    Diagnosis::Cirrhosis,
];

/// Diagnoses in increasing severity; `Ord` is the precedence used when
/// several heads are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Diagnosis {
    Indeterminate,
    Healthy,
    SignsOnly,
    HepatitisC,
    Fibrosis,
    Cirrhosis,
}

impl Diagnosis {
    /// The head property a diagnostic rule derives for this diagnosis.
    pub fn head_property(self) -> Option<&'static str> {
        match self {
            Diagnosis::Indeterminate => None,
            Diagnosis::Healthy => Some("isHealthy"),
            Diagnosis::SignsOnly => Some("isShowingSigns"),
            Diagnosis::HepatitisC => Some("isHepatitisCpatient"),
            Diagnosis::Fibrosis => Some("isFibrosisPatient"),
            Diagnosis::Cirrhosis => Some("isCirrhosisPatient"),
        }
    }

    fn from_head(local: &str) -> Option<Diagnosis> {
        HEADS.into_iter().find(|d| d.head_property() == Some(local))
    }

    pub fn label(self) -> &'static str {
        match self {
            Diagnosis::Indeterminate => "Indeterminate",
            Diagnosis::Healthy => "Healthy",
            Diagnosis::SignsOnly => "Signs of liver abnormality",
            Diagnosis::HepatitisC => "Hepatitis C",
            Diagnosis::Fibrosis => "Fibrosis",
            Diagnosis::Cirrhosis => "Cirrhosis",
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisResult {
    pub diagnosis: Diagnosis,
    /// Every diagnosis whose head was derived, most severe first.
    pub derived: Vec<Diagnosis>,
    /// Proofs of the diagnosis heads about this patient.
    pub traces: Vec<ProofStep>,
}

/// Runs `rules` over the record's triples and reads the diagnosis from the
/// derived head properties.
pub fn diagnose(record: &PatientRecord, rules: &[Rule]) -> Result<DiagnosisResult, EvalError> {
    diagnose_graph(&record.to_graph(), &record.subject(), rules)
}

pub fn diagnose_graph(
    graph: &Graph,
    subject: &Iri,
    rules: &[Rule],
) -> Result<DiagnosisResult, EvalError> {
    let saturated = graph.union(&infer(graph, rules)?.derived);
    let mut derived = Vec::new();
    for d in HEADS {
        let p = onto(d.head_property().expect("heads are determinate"));
        if saturated.contains(&Triple::new(subject.clone(), p, Literal::boolean(true))) {
            derived.push(d);
        }
    }
    // Every rule that supports a diagnosis head, not only the first one
    // the reasoner happened to use.
    let truth = Term::from(Literal::boolean(true));
    let mut traces = Vec::new();
    for rule in rules {
        for step in firings(&saturated, rule)? {
            let is_head = step
                .derived
                .predicate
                .as_str()
                .strip_prefix(ONTO)
                .and_then(Diagnosis::from_head)
                .is_some();
            if &step.derived.subject == subject && step.derived.object == truth && is_head {
                traces.push(step);
            }
        }
    }
    derived.sort_by(|a, b| b.cmp(a));
    let diagnosis = derived.first().copied().unwrap_or(Diagnosis::Indeterminate);
    Ok(DiagnosisResult {
        diagnosis,
        derived,
        traces,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommendedTest {
    pub test: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<String>,
    pub reason: String,
}

fn test(name: &str, interval: Option<&str>, reason: &str) -> RecommendedTest {
    RecommendedTest {
        test: name.to_string(),
        interval: interval.map(str::to_string),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no follow-up tests are recommended for a healthy patient")]
pub struct HealthyNeedsNoTests;

/// Follow-up tests per diagnosis. A healthy diagnosis has none and is a
/// contract violation here.
pub fn recommend_tests(diagnosis: Diagnosis) -> Result<Vec<RecommendedTest>, HealthyNeedsNoTests> {
    Ok(match diagnosis {
        Diagnosis::Healthy => return Err(HealthyNeedsNoTests),
        Diagnosis::HepatitisC => vec![
            test("HCV RNA", None, "confirm active infection"),
            test("Fibrosis staging", None, "grade liver damage (F0-F4)"),
            test(
                "Child-Pugh assessment",
                None,
                "detect cirrhosis and decompensation",
            ),
        ],
        Diagnosis::Cirrhosis => vec![
            test("Child-Pugh assessment", None, "grade cirrhosis severity"),
            test(
                "Ultrasound",
                Some("every 6 months"),
                "hepatocellular carcinoma screening",
            ),
            test("Upper endoscopy", None, "varices screening"),
        ],
        Diagnosis::Fibrosis => vec![test("Fibrosis staging", None, "grade liver damage (F0-F4)")],
        Diagnosis::SignsOnly | Diagnosis::Indeterminate => vec![test(
            "Liver function panel",
            Some("repeat"),
            "lab values do not settle a diagnosis",
        )],
    })
}
