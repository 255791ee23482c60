use serde::{Deserialize, Serialize};

use super::plan::{assess_followup, plan_treatment, Followup, PlanError, TreatmentPlan};
use super::report::{parse_report, ParsedReport, ReportError, ReportFacts};
use super::{diagnose, recommend_tests, Diagnosis, PatientRecord, RecommendedTest, RecordError};
use crate::rules::{EvalError, ProofStep, Rule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionState {
    New,
    LabsEntered,
    Diagnosed,
    TestsRecommended,
    ReportIngested,
    TreatmentPlanned,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("cannot {action} in state {state:?}")]
    InvalidTransition {
        state: SessionState,
        action: &'static str,
    },
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One patient's pass through diagnosis and treatment. States only move
/// forward; a healthy diagnosis skips test recommendation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosisSession {
    pub id: String,
    pub state: SessionState,
    pub record: Option<PatientRecord>,
    pub diagnosis: Option<Diagnosis>,
    /// Every diagnosis head that was derived, most severe first.
    pub derived: Vec<Diagnosis>,
    pub fired_rules: Vec<ProofStep>,
    pub tests: Vec<RecommendedTest>,
    pub report: Option<ReportFacts>,
    pub plan: Option<TreatmentPlan>,
    pub followup: Option<Followup>,
}

impl DiagnosisSession {
    pub fn new(id: impl Into<String>) -> Self {
        DiagnosisSession {
            id: id.into(),
            state: SessionState::New,
            record: None,
            diagnosis: None,
            derived: Vec::new(),
            fired_rules: Vec::new(),
            tests: Vec::new(),
            report: None,
            plan: None,
            followup: None,
        }
    }

    fn require(&self, allowed: &[SessionState], action: &'static str) -> Result<(), SessionError> {
        if allowed.contains(&self.state) {
            Ok(())
        } else {
            Err(SessionError::InvalidTransition {
                state: self.state,
                action,
            })
        }
    }

    pub fn enter_labs(&mut self, record: PatientRecord) -> Result<(), SessionError> {
        self.require(&[SessionState::New], "enter labs")?;
        record.validate()?;
        self.record = Some(record);
        self.state = SessionState::LabsEntered;
        Ok(())
    }

    pub fn diagnose(&mut self, rules: &[Rule]) -> Result<Diagnosis, SessionError> {
        self.require(&[SessionState::LabsEntered], "diagnose")?;
        let record = self.record.as_ref().expect("labs entered");
        let result = diagnose(record, rules)?;
        self.diagnosis = Some(result.diagnosis);
        self.derived = result.derived;
        self.fired_rules = result.traces;
        self.state = SessionState::Diagnosed;
        Ok(result.diagnosis)
    }

    pub fn recommend_tests(&mut self) -> Result<&[RecommendedTest], SessionError> {
        let healthy = self.diagnosis == Some(Diagnosis::Healthy);
        if healthy || self.state != SessionState::Diagnosed {
            return Err(SessionError::InvalidTransition {
                state: self.state,
                action: "recommend tests",
            });
        }
        let diagnosis = self.diagnosis.expect("diagnosed");
        self.tests = recommend_tests(diagnosis).expect("diagnosis is not healthy");
        self.state = SessionState::TestsRecommended;
        Ok(&self.tests)
    }

    fn report_allowed(&self) -> Result<(), SessionError> {
        let healthy = self.diagnosis == Some(Diagnosis::Healthy);
        let ok = self.state == SessionState::TestsRecommended
            || (healthy && self.state == SessionState::Diagnosed);
        if ok {
            Ok(())
        } else {
            Err(SessionError::InvalidTransition {
                state: self.state,
                action: "ingest a report",
            })
        }
    }

    pub fn ingest_report(&mut self, text: &str) -> Result<ParsedReport, SessionError> {
        self.report_allowed()?;
        let parsed = parse_report(text)?;
        self.report = Some(parsed.facts);
        self.state = SessionState::ReportIngested;
        Ok(parsed)
    }

    pub fn ingest_facts(&mut self, facts: ReportFacts) -> Result<(), SessionError> {
        self.report_allowed()?;
        self.report = Some(facts.normalized());
        self.state = SessionState::ReportIngested;
        Ok(())
    }

    pub fn plan_treatment(&mut self) -> Result<&TreatmentPlan, SessionError> {
        self.require(&[SessionState::ReportIngested], "plan treatment")?;
        let plan = plan_treatment(self.report.as_ref().expect("report ingested"))?;
        self.state = SessionState::TreatmentPlanned;
        Ok(self.plan.insert(plan))
    }

    /// Records the post-treatment HCV RNA result.
    pub fn record_followup(&mut self, facts: &ReportFacts) -> Result<&Followup, SessionError> {
        self.require(&[SessionState::TreatmentPlanned], "record follow-up")?;
        let outcome = assess_followup(self.plan.as_ref().expect("plan present"), facts)?;
        Ok(self.followup.insert(outcome))
    }
}
