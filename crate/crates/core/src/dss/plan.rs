//! Treatment planning for treatment-naive hepatitis C.
//!
//! The antiviral regimen follows the national treatment algorithm: no
//! cirrhosis, compensated cirrhosis (Child-Pugh A) and decompensated
//! cirrhosis (Child-Pugh B/C) each get their own 12-week regimen. Monitoring,
//! lifestyle, supportive care and referrals come from running the guideline
//! rules over the report facts, so every item names the rule behind it.

use std::fmt;

use serde::Serialize;

use super::report::{ChildPugh, ReportFacts, Viremia};
use crate::rules::builtin::guideline_rules;
use crate::rules::{infer, EvalError};
use crate::store::{rdf_type, Graph, Iri, Literal, Term, Triple};
use crate::vocab::{ONTO, RECORD_BASE};

pub const TREATMENT_WEEKS: u32 = 12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("HCV RNA result is required")]
    MissingHcvRna,
    #[error("no antiviral treatment was planned, so there is nothing to follow up")]
    NoTreatment,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dose {
    pub min_mg: u32,
    pub max_mg: u32,
}

impl Dose {
    pub fn fixed(mg: u32) -> Self {
        Dose {
            min_mg: mg,
            max_mg: mg,
        }
    }
}

impl fmt::Display for Dose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.min_mg == self.max_mg {
            write!(f, "{} mg", self.min_mg)
        } else {
            write!(f, "{}-{} mg", self.min_mg, self.max_mg)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Drug {
    pub drug: String,
    pub dose: Dose,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PlanItem {
    pub action: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<String>,
    /// Guideline rule name, or `regimen:<branch>` for algorithm branches.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreatmentPlan {
    /// `regimen:<branch>` tag of the algorithm branch taken.
    pub branch: String,
    pub regimen: Vec<Drug>,
    pub duration_weeks: u32,
    pub monitoring: Vec<PlanItem>,
    pub lifestyle: Vec<PlanItem>,
    pub supportive: Vec<PlanItem>,
    pub referrals: Vec<PlanItem>,
    pub notes: Vec<PlanItem>,
    /// Guideline rules that fired, in firing order.
    pub fired_rules: Vec<String>,
}

impl TreatmentPlan {
    pub fn items(&self) -> impl Iterator<Item = &PlanItem> {
        self.monitoring
            .iter()
            .chain(&self.lifestyle)
            .chain(&self.supportive)
            .chain(&self.referrals)
            .chain(&self.notes)
    }

    pub fn is_empty(&self) -> bool {
        self.regimen.is_empty() && self.items().next().is_none()
    }
}

fn onto(local: &str) -> Iri {
    Iri::new(format!("{ONTO}{local}")).expect("ontology names form valid IRIs")
}

fn subject() -> Iri {
    Iri::new(format!("{RECORD_BASE}patient/plan")).expect("valid IRI")
}

fn drug(name: &str, dose: Dose, branch: &str) -> Drug {
    Drug {
        drug: name.to_string(),
        dose,
        provenance: branch.to_string(),
    }
}

fn item(action: &str, interval: Option<&str>, provenance: &str) -> PlanItem {
    PlanItem {
        action: action.to_string(),
        interval: interval.map(str::to_string),
        provenance: provenance.to_string(),
    }
}

pub const BRANCH_NEGATIVE: &str = "regimen:viremia_negative";
pub const BRANCH_NON_CIRRHOTIC: &str = "regimen:non_cirrhotic";
pub const BRANCH_COMPENSATED: &str = "regimen:compensated_cirrhosis";
pub const BRANCH_DECOMPENSATED: &str = "regimen:decompensated_cirrhosis";

fn regimen(facts: &ReportFacts) -> (&'static str, Vec<Drug>) {
    let sof = |b| drug("Sofosbuvir", Dose::fixed(400), b);
    let decompensated = facts.is_decompensated()
        || matches!(facts.child_pugh, Some(ChildPugh::B) | Some(ChildPugh::C));
    if decompensated {
        let b = BRANCH_DECOMPENSATED;
        (
            b,
            vec![
                sof(b),
                drug("Velpatasvir", Dose::fixed(100), b),
                drug(
                    "Ribavirin",
                    Dose {
                        min_mg: 600,
                        max_mg: 1200,
                    },
                    b,
                ),
            ],
        )
    } else if facts.has_cirrhosis() {
        let b = BRANCH_COMPENSATED;
        (b, vec![sof(b), drug("Velpatasvir", Dose::fixed(100), b)])
    } else {
        let b = BRANCH_NON_CIRRHOTIC;
        (b, vec![sof(b), drug("Daclatasvir", Dose::fixed(60), b)])
    }
}

/// The facts as triples over the guideline vocabulary, including the
/// planned treatment course.
fn facts_graph(facts: &ReportFacts, treated: bool) -> Graph {
    let p = subject();
    let mut g = Graph::new();
    g.insert(Triple::new(p.clone(), rdf_type(), onto("Patient")));
    if facts.hcv_rna == Some(Viremia::Positive) {
        let test = Iri::new(format!("{}/hcv-rna", p.as_str())).expect("valid IRI");
        g.insert(Triple::new(p.clone(), onto("hasTestResult"), test.clone()));
        g.insert(Triple::new(test.clone(), rdf_type(), onto("HCVRNA_Test")));
        g.insert(Triple::new(test, rdf_type(), onto("PositiveResult")));
    }
    if let Some(stage) = facts.fibrosis_stage {
        g.insert(Triple::new(
            p.clone(),
            onto("hasFibrosisStage"),
            Literal::integer(stage.into()),
        ));
        if stage == 4 {
            let biopsy = Iri::new(format!("{}/biopsy", p.as_str())).expect("valid IRI");
            g.insert(Triple::new(
                p.clone(),
                onto("hasLiverBiopsyResult"),
                biopsy.clone(),
            ));
            g.insert(Triple::new(biopsy, onto("CirrhosisStage"), onto("F4")));
        }
    }
    // Child-Pugh grading, ascites and decompensation only arise in
    // cirrhosis; F4 alone is left to the biopsy rule.
    if facts.child_pugh.is_some() || facts.ascites == Some(true) || facts.is_decompensated() {
        g.insert(Triple::new(
            p.clone(),
            rdf_type(),
            onto("Cirrhosis_Patient"),
        ));
    }
    if facts.ascites == Some(true) {
        g.insert(Triple::new(p.clone(), rdf_type(), onto("hasAscites")));
    }
    if facts.is_decompensated() {
        g.insert(Triple::new(
            p.clone(),
            rdf_type(),
            onto("hasDecompensatedLiverDisease"),
        ));
    }
    if treated {
        g.insert(Triple::new(
            p.clone(),
            rdf_type(),
            onto("OnAntiviralTreatment"),
        ));
        g.insert(Triple::new(p, rdf_type(), onto("CompletedTreatment")));
    }
    g
}

fn local(term: &Term) -> Option<&str> {
    match term {
        Term::Iri(iri) => iri.as_str().strip_prefix(ONTO),
        Term::Literal(_) => None,
    }
}

/// Plans treatment from report facts.
pub fn plan_treatment(facts: &ReportFacts) -> Result<TreatmentPlan, PlanError> {
    let facts = facts.normalized();
    let viremia = facts.hcv_rna.ok_or(PlanError::MissingHcvRna)?;
    if viremia == Viremia::Negative {
        let b = BRANCH_NEGATIVE;
        return Ok(TreatmentPlan {
            branch: b.to_string(),
            regimen: Vec::new(),
            duration_weeks: 0,
            monitoring: Vec::new(),
            lifestyle: vec![
                item("Avoid alcohol", None, b),
                item("Vaccination against Hepatitis A", None, b),
                item("Vaccination against Hepatitis B", None, b),
            ],
            supportive: Vec::new(),
            referrals: Vec::new(),
            notes: Vec::new(),
            fired_rules: Vec::new(),
        });
    }
    let (branch, drugs) = regimen(&facts);
    let graph = facts_graph(&facts, true);
    let inference = infer(&graph, &guideline_rules())?;
    let derived = graph.union(&inference.derived);
    let p = subject();
    let has =
        |pred: &str, obj: &str| derived.contains(&Triple::new(p.clone(), onto(pred), onto(obj)));

    let mut plan = TreatmentPlan {
        branch: branch.to_string(),
        regimen: drugs,
        duration_weeks: TREATMENT_WEEKS,
        monitoring: Vec::new(),
        lifestyle: Vec::new(),
        supportive: Vec::new(),
        referrals: Vec::new(),
        notes: Vec::new(),
        fired_rules: Vec::new(),
    };
    for step in &inference.proofs {
        if !plan.fired_rules.contains(&step.rule) {
            plan.fired_rules.push(step.rule.clone());
        }
        let t = &step.derived;
        if t.subject != p {
            continue;
        }
        let rule = step.rule.as_str();
        let pred = t.predicate.as_str().strip_prefix(ONTO).unwrap_or("");
        let obj = local(&t.object);
        match (pred, obj) {
            ("needsMonitoring", Some("every4Weeks")) => {
                plan.monitoring
                    .push(item("On-treatment review", Some("every 4 weeks"), rule))
            }
            ("needsTest", Some("HCVRNA_Test")) => {
                let when = has("needsTestTiming", "postTreatment12Weeks")
                    .then_some("12 weeks post-treatment");
                plan.monitoring.push(item("HCV RNA test", when, rule));
            }
            ("needsScreening", Some("Ultrasound")) => {
                let when =
                    has("needsScreeningInterval", "every6Months").then_some("every 6 months");
                plan.monitoring
                    .push(item("Ultrasound (HCC screening)", when, rule));
            }
            ("needsScreening", Some("UpperEndoscopy")) => {
                plan.monitoring
                    .push(item("Upper endoscopy (varices screening)", None, rule))
            }
            ("needsMonitoring", Some("HepaticEncephalopathySigns")) => plan.monitoring.push(item(
                "Hepatic encephalopathy signs",
                Some("every visit"),
                rule,
            )),
            ("needsLifestyleChange", Some("AvoidAlcohol")) => {
                plan.lifestyle.push(item("Avoid alcohol", None, rule))
            }
            ("needsLifestyleChange", Some("AbstainFromAlcohol")) => {
                plan.lifestyle
                    .push(item("Abstain from alcohol completely", None, rule))
            }
            ("needsVaccination", Some(v)) => {
                let disease = v.replace("Hepatitis", "Hepatitis ");
                plan.lifestyle
                    .push(item(&format!("Vaccination against {disease}"), None, rule));
            }
            ("needsDietaryChange", Some("SodiumRestriction")) => {
                plan.lifestyle.push(item("Sodium restriction", None, rule))
            }
            ("needsTreatment", Some("Diuretics")) => {
                plan.supportive.push(item("Diuretics", None, rule))
            }
            ("needsReferral", Some("LiverTransplantEvaluation")) => {
                plan.referrals
                    .push(item("Liver transplant evaluation", None, rule))
            }
            ("NeedsSpecializedManagement", _) => plan.referrals.push(item(
                "Specialized management of advanced fibrosis",
                None,
                rule,
            )),
            ("EligibleForStandardTreatment", _) => plan.notes.push(item(
                "Eligible for standard antiviral treatment (F0-F2)",
                None,
                rule,
            )),
            _ => {}
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Followup {
    /// Sustained virological response: HCV RNA negative 12 weeks after
    /// treatment.
    SvrAchieved,
    NonResponder {
        note: String,
        provenance: String,
    },
}

/// Reads the 12-weeks-post-treatment HCV RNA result.
pub fn assess_followup(plan: &TreatmentPlan, facts: &ReportFacts) -> Result<Followup, PlanError> {
    if plan.regimen.is_empty() {
        return Err(PlanError::NoTreatment);
    }
    match facts.hcv_rna.ok_or(PlanError::MissingHcvRna)? {
        Viremia::Negative => Ok(Followup::SvrAchieved),
        Viremia::Positive => {
            let mut graph = facts_graph(facts, true);
            let test = Iri::new(format!("{}/hcv-rna", subject().as_str())).expect("valid IRI");
            graph.insert(Triple::new(test, rdf_type(), onto("postTreatment12Weeks")));
            let inference = infer(&graph, &guideline_rules())?;
            let step = inference
                .proofs
                .iter()
                .find(|s| s.derived.object == Term::Iri(onto("NonResponder")))
                .expect("non-responder rule fires on a positive post-treatment test");
            Ok(Followup::NonResponder {
                note: "HCV RNA still positive 12 weeks after treatment; refer to a specialist treatment centre for retreatment".to_string(),
                provenance: step.rule.clone(),
            })
        }
    }
}
