//! Plaintext test-report parsing.
//!
//! Recognized lines are `KEY: VALUE`, case-insensitive:
//!
//! ```text
//! HCV RNA: POSITIVE | NEGATIVE
//! FIBROSIS STAGE: F0 .. F4
//! CHILD-PUGH: A | B | C
//! ASCITES: PRESENT | ABSENT
//! DECOMPENSATED: YES | NO
//! ```
//!
//! Anything else is counted and ignored.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Viremia {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChildPugh {
    A,
    B,
    C,
}

impl ChildPugh {
    pub fn is_decompensated(self) -> bool {
        self != ChildPugh::A
    }
}

impl fmt::Display for ChildPugh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFacts {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hcv_rna: Option<Viremia>,
    /// Fibrosis stage 0..=4 (F0..F4).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fibrosis_stage: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub child_pugh: Option<ChildPugh>,
    /// `Some(true)` when ascites is present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ascites: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decompensated: Option<bool>,
}

impl ReportFacts {
    /// Child-Pugh B or C implies decompensation unless stated otherwise.
    pub fn normalized(mut self) -> Self {
        if self.decompensated.is_none() && self.child_pugh.is_some_and(ChildPugh::is_decompensated)
        {
            self.decompensated = Some(true);
        }
        self
    }

    /// Child-Pugh class, F4, ascites or decompensation all mark cirrhosis.
    pub fn has_cirrhosis(&self) -> bool {
        self.child_pugh.is_some()
            || self.fibrosis_stage == Some(4)
            || self.ascites == Some(true)
            || self.decompensated == Some(true)
    }

    pub fn is_decompensated(&self) -> bool {
        self.normalized().decompensated == Some(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParsedReport {
    pub facts: ReportFacts,
    pub recognized: usize,
    pub ignored: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("line {line}: {key} is {second}, but an earlier line says {first}")]
    Conflict {
        line: usize,
        key: &'static str,
        first: String,
        second: String,
    },
}

fn normalize_key(key: &str) -> String {
    key.split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|w| !w.is_empty())
        .map(str::to_ascii_uppercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn set<T: PartialEq + fmt::Debug>(
    slot: &mut Option<T>,
    value: T,
    key: &'static str,
    line: usize,
) -> Result<(), ReportError> {
    match slot {
        Some(existing) if *existing != value => Err(ReportError::Conflict {
            line,
            key,
            first: format!("{existing:?}"),
            second: format!("{value:?}"),
        }),
        _ => {
            *slot = Some(value);
            Ok(())
        }
    }
}

pub fn parse_report(text: &str) -> Result<ParsedReport, ReportError> {
    let mut facts = ReportFacts::default();
    let mut recognized = 0;
    let mut ignored = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let Some((key, value)) = raw.split_once(':') else {
            ignored += 1;
            continue;
        };
        let value = value.trim().to_ascii_uppercase();
        let hit = match (normalize_key(key).as_str(), value.as_str()) {
            ("HCV RNA", "POSITIVE") => {
                Some(set(&mut facts.hcv_rna, Viremia::Positive, "HCV RNA", line))
            }
            ("HCV RNA", "NEGATIVE") => {
                Some(set(&mut facts.hcv_rna, Viremia::Negative, "HCV RNA", line))
            }
            ("FIBROSIS STAGE", v) => match v.strip_prefix('F').and_then(|d| d.parse::<u8>().ok()) {
                Some(stage) if stage <= 4 => Some(set(
                    &mut facts.fibrosis_stage,
                    stage,
                    "FIBROSIS STAGE",
                    line,
                )),
                _ => None,
            },
            ("CHILD PUGH", "A") => {
                Some(set(&mut facts.child_pugh, ChildPugh::A, "CHILD-PUGH", line))
            }
            ("CHILD PUGH", "B") => {
                Some(set(&mut facts.child_pugh, ChildPugh::B, "CHILD-PUGH", line))
            }
            ("CHILD PUGH", "C") => {
                Some(set(&mut facts.child_pugh, ChildPugh::C, "CHILD-PUGH", line))
            }
            ("ASCITES", "PRESENT") => Some(set(&mut facts.ascites, true, "ASCITES", line)),
            ("ASCITES", "ABSENT") => Some(set(&mut facts.ascites, false, "ASCITES", line)),
            ("DECOMPENSATED", "YES") => {
                Some(set(&mut facts.decompensated, true, "DECOMPENSATED", line))
            }
            ("DECOMPENSATED", "NO") => {
                Some(set(&mut facts.decompensated, false, "DECOMPENSATED", line))
            }
            _ => None,
        };
        match hit {
            Some(result) => {
                result?;
                recognized += 1;
            }
            None => ignored += 1,
        }
    }
    Ok(ParsedReport {
        facts: facts.normalized(),
        recognized,
        ignored,
    })
}
