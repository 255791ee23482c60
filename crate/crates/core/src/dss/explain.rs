//! Deterministic natural-language explanations of a session.

use std::fmt::Write as _;

use super::plan::{Followup, PlanItem};
use super::report::{ChildPugh, Viremia};
use super::session::{DiagnosisSession, SessionError, SessionState};
use crate::rules::{Comparison, ProofStep};

/// Optional post-processing of the template text, e.g. by a remote
/// text-generation service.
pub trait TextRefiner {
    fn refine(&self, text: &str) -> Result<String, String>;
}

/// `?ast` in `swrlb:lessThanOrEqualTo(?ast, ...)` names the AST lab.
fn comparison_subject(c: &Comparison) -> String {
    c.atom
        .split_once("(?")
        .and_then(|(_, rest)| rest.split([',', ')']).next())
        .map(str::to_ascii_uppercase)
        .unwrap_or_else(|| "value".to_string())
}

fn head_name(step: &ProofStep) -> String {
    let p = step.derived.predicate.as_str();
    p.rsplit(['#', '/']).next().unwrap_or(p).to_string()
}

fn write_items(out: &mut String, title: &str, items: &[PlanItem]) {
    if items.is_empty() {
        return;
    }
    let _ = writeln!(out, "{title}:");
    for i in items {
        match &i.interval {
            Some(when) => {
                let _ = writeln!(out, "- {}, {} [{}]", i.action, when, i.provenance);
            }
            None => {
                let _ = writeln!(out, "- {} [{}]", i.action, i.provenance);
            }
        }
    }
}

/// Renders the session as plain text. Identical sessions give identical
/// bytes.
pub fn explain_session(session: &DiagnosisSession) -> Result<String, SessionError> {
    if session.state < SessionState::Diagnosed {
        return Err(SessionError::InvalidTransition {
            state: session.state,
            action: "explain",
        });
    }
    let mut out = String::new();
    let record = session
        .record
        .as_ref()
        .expect("diagnosed sessions have a record");
    let diagnosis = session.diagnosis.expect("diagnosed");
    let sex = if record.sex == 1 { "male" } else { "female" };
    let _ = writeln!(out, "Session {}", session.id);
    let _ = writeln!(out, "Patient {} (age {}, {sex})", record.uid, record.age);
    let _ = writeln!(out, "Diagnosis: {diagnosis}");
    if session.derived.len() > 1 {
        let others: Vec<&str> = session.derived[1..].iter().map(|d| d.label()).collect();
        let _ = writeln!(
            out,
            "Also derived: {} (the most severe finding is reported)",
            others.join(", ")
        );
    }

    out.push('\n');
    if session.fired_rules.is_empty() {
        let _ = writeln!(
            out,
            "No diagnostic rule matched these lab values, so the result is indeterminate."
        );
    } else {
        let _ = writeln!(out, "Why:");
        for step in &session.fired_rules {
            let _ = writeln!(
                out,
                "- Rule {} concluded {} because:",
                step.rule,
                head_name(step)
            );
            for c in &step.comparisons {
                let _ = writeln!(
                    out,
                    "    {} {} {} {}",
                    comparison_subject(c),
                    c.left,
                    c.op.symbol(),
                    c.right
                );
            }
        }
    }

    if !session.tests.is_empty() {
        let _ = writeln!(out, "\nRecommended tests:");
        for t in &session.tests {
            match &t.interval {
                Some(when) => {
                    let _ = writeln!(out, "- {} ({when}): {}", t.test, t.reason);
                }
                None => {
                    let _ = writeln!(out, "- {}: {}", t.test, t.reason);
                }
            }
        }
    }

    if let Some(facts) = &session.report {
        let _ = writeln!(out, "\nReport findings:");
        if let Some(v) = facts.hcv_rna {
            let v = if v == Viremia::Positive {
                "positive"
            } else {
                "negative"
            };
            let _ = writeln!(out, "- HCV RNA: {v}");
        }
        if let Some(stage) = facts.fibrosis_stage {
            let _ = writeln!(out, "- Fibrosis stage: F{stage}");
        }
        if let Some(cp) = facts.child_pugh {
            let _ = writeln!(out, "- Child-Pugh class: {cp}");
        }
        if let Some(a) = facts.ascites {
            let _ = writeln!(out, "- Ascites: {}", if a { "present" } else { "absent" });
        }
        if facts.is_decompensated() {
            let _ = writeln!(out, "- Decompensated liver disease");
        }
    }

    if let Some(plan) = &session.plan {
        let _ = writeln!(out, "\nTreatment plan [{}]:", plan.branch);
        if plan.regimen.is_empty() {
            let _ = writeln!(out, "- No antiviral treatment needed");
        }
        for d in &plan.regimen {
            let _ = writeln!(
                out,
                "- {} {} for {} weeks",
                d.drug, d.dose, plan.duration_weeks
            );
        }
        write_items(&mut out, "Monitoring", &plan.monitoring);
        write_items(&mut out, "Lifestyle", &plan.lifestyle);
        write_items(&mut out, "Supportive care", &plan.supportive);
        write_items(&mut out, "Referrals", &plan.referrals);
        write_items(&mut out, "Notes", &plan.notes);

        let mut cautions = Vec::new();
        if !plan.regimen.is_empty() {
            cautions.push(
                "Confirm the patient is HIV negative and not pregnant before starting medication."
                    .to_string(),
            );
            cautions.push("Check liver function regularly while on treatment.".to_string());
        }
        let cp = session.report.as_ref().and_then(|f| f.child_pugh);
        if !plan.regimen.is_empty() && cp == Some(ChildPugh::B) {
            cautions.push(
                "Child-Pugh B: watch for adverse reactions; the regimen may need adjustment if they occur."
                    .to_string(),
            );
        }
        if cp == Some(ChildPugh::C) {
            cautions.push(
                "Child-Pugh C: test bilirubin and albumin regularly and monitor ascites and encephalopathy to judge the response."
                    .to_string(),
            );
        }
        if !cautions.is_empty() {
            let _ = writeln!(out, "Cautions:");
            for c in cautions {
                let _ = writeln!(out, "- {c}");
            }
        }
    }

    match &session.followup {
        Some(Followup::SvrAchieved) => {
            let _ = writeln!(
                out,
                "\nFollow-up: sustained virological response achieved (HCV RNA negative 12 weeks after treatment)."
            );
        }
        Some(Followup::NonResponder { note, provenance }) => {
            let _ = writeln!(out, "\nFollow-up: non-responder [{provenance}]. {note}.");
        }
        None => {}
    }
    Ok(out)
}

/// Template text, optionally refined. A failing refiner leaves the template
/// output unchanged.
pub fn explain_with(
    session: &DiagnosisSession,
    refiner: Option<&dyn TextRefiner>,
) -> Result<String, SessionError> {
    let text = explain_session(session)?;
    Ok(match refiner {
        Some(r) => r.refine(&text).unwrap_or(text),
        None => text,
    })
}
