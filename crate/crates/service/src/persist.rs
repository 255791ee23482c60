//! On-disk state under the data directory:
//!
//! ```text
//! graphs/manifest.json     sorted graph ids
//! graphs/<id>.nt           canonical N-Triples, id = sha256 of the file
//! rules.swl                deployed stream rules
//! sessions/manifest.json   sorted session ids
//! sessions/<id>.json       session journal
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use liverkg::dss::{DiagnosisSession, PatientRecord, ReportFacts, SessionError, SessionState};
use liverkg::rules::{parse_rules, serialize_rules, Rule, RuleError};
use liverkg::store::{parse_ntriples, serialize_ntriples, Graph, StoreError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Graph { path: PathBuf, source: StoreError },
    #[error("{path}: {source}")]
    Rules { path: PathBuf, source: RuleError },
    #[error("session {id}: replay failed: {source}")]
    Replay { id: String, source: SessionError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PersistError + '_ {
    move |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Content id of a graph: hex SHA-256 of its canonical N-Triples.
pub fn graph_id(graph: &Graph) -> String {
    hex::encode(Sha256::digest(serialize_ntriples(graph).as_bytes()))
}

pub(crate) fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// A session together with the inputs needed to rebuild it.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSlot {
    pub session: DiagnosisSession,
    pub report_text: Option<String>,
    pub followup_facts: Option<ReportFacts>,
}

impl SessionSlot {
    pub fn new(id: &str) -> Self {
        SessionSlot {
            session: DiagnosisSession::new(id),
            report_text: None,
            followup_facts: None,
        }
    }

    pub fn journal(&self) -> SessionJournal {
        let s = &self.session;
        SessionJournal {
            id: s.id.clone(),
            state: s.state,
            record: s.record.clone(),
            tests_recommended: s.state >= SessionState::TestsRecommended && !s.tests.is_empty(),
            report: s.report,
            report_text: self.report_text.clone(),
            followup: self.followup_facts,
        }
    }

    /// Rebuilds the session by replaying the journal's inputs. Every step
    /// is deterministic, so the result equals the session that was saved.
    pub fn replay(journal: &SessionJournal, rules: &[Rule]) -> Result<Self, SessionError> {
        let mut s = DiagnosisSession::new(journal.id.clone());
        if let Some(record) = &journal.record {
            s.enter_labs(record.clone())?;
        }
        if journal.state >= SessionState::Diagnosed {
            s.diagnose(rules)?;
        }
        if journal.tests_recommended {
            s.recommend_tests()?;
        }
        if let Some(facts) = journal.report {
            s.ingest_facts(facts)?;
        }
        if journal.state >= SessionState::TreatmentPlanned {
            s.plan_treatment()?;
        }
        if let Some(facts) = &journal.followup {
            s.record_followup(facts)?;
        }
        if s.state != journal.state {
            return Err(SessionError::InvalidTransition {
                state: s.state,
                action: "restore saved state",
            });
        }
        Ok(SessionSlot {
            session: s,
            report_text: journal.report_text.clone(),
            followup_facts: journal.followup,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionJournal {
    pub id: String,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<PatientRecord>,
    #[serde(default)]
    pub tests_recommended: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportFacts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup: Option<ReportFacts>,
}

/// Everything read back from a data directory.
#[derive(Debug, Default)]
pub struct Snapshot {
    pub graphs: BTreeMap<String, Graph>,
    pub rules: Vec<Rule>,
    pub sessions: BTreeMap<String, SessionSlot>,
}

pub struct DataDir {
    root: PathBuf,
    // serializes manifest read-modify-write cycles
    manifest_lock: Mutex<()>,
}

impl DataDir {
    /// Creates the layout if needed. Fails when the directory is not
    /// writable.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, PersistError> {
        let root = root.into();
        for dir in [root.join("graphs"), root.join("sessions")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let dir = DataDir {
            root,
            manifest_lock: Mutex::new(()),
        };
        for kind in ["graphs", "sessions"] {
            let path = dir.manifest_path(kind);
            if !path.exists() {
                dir.write_manifest(kind, &[])?;
            }
        }
        let rules = dir.root.join("rules.swl");
        if !rules.exists() {
            write_atomic(&rules, b"")?;
        }
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manifest_path(&self, kind: &str) -> PathBuf {
        self.root.join(kind).join("manifest.json")
    }

    fn read_manifest(&self, kind: &str) -> Result<Vec<String>, PersistError> {
        let path = self.manifest_path(kind);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let ids: Vec<String> = serde_json::from_str(&text).map_err(|e| PersistError::Corrupt {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if let Some(bad) = ids.iter().find(|id| !valid_id(id)) {
            return Err(PersistError::Corrupt {
                path,
                message: format!("invalid id {bad:?}"),
            });
        }
        Ok(ids)
    }

    fn write_manifest(&self, kind: &str, ids: &[String]) -> Result<(), PersistError> {
        let mut text = serde_json::to_string_pretty(ids).expect("string list serializes");
        text.push('\n');
        write_atomic(&self.manifest_path(kind), text.as_bytes())
    }

    fn add_to_manifest(&self, kind: &str, id: &str) -> Result<(), PersistError> {
        let _guard = self.manifest_lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut ids = self.read_manifest(kind)?;
        if let Err(pos) = ids.binary_search_by(|x| x.as_str().cmp(id)) {
            ids.insert(pos, id.to_string());
            self.write_manifest(kind, &ids)?;
        }
        Ok(())
    }

    pub fn save_graph(&self, id: &str, graph: &Graph) -> Result<(), PersistError> {
        let path = self.root.join("graphs").join(format!("{id}.nt"));
        write_atomic(&path, serialize_ntriples(graph).as_bytes())?;
        self.add_to_manifest("graphs", id)
    }

    pub fn save_rules(&self, rules: &[Rule]) -> Result<(), PersistError> {
        write_atomic(&self.root.join("rules.swl"), serialize_rules(rules).as_bytes())
    }

    pub fn save_session(&self, slot: &SessionSlot) -> Result<(), PersistError> {
        let journal = slot.journal();
        let path = self
            .root
            .join("sessions")
            .join(format!("{}.json", journal.id));
        let mut text = serde_json::to_string_pretty(&journal).expect("journal serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        self.add_to_manifest("sessions", &journal.id)
    }

    /// Reads everything back. Graph files are checked against their
    /// content id and sessions are rebuilt with `diagnostic_rules`.
    pub fn load(&self, diagnostic_rules: &[Rule]) -> Result<Snapshot, PersistError> {
        let mut snap = Snapshot::default();
        for id in self.read_manifest("graphs")? {
            let path = self.root.join("graphs").join(format!("{id}.nt"));
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let graph = parse_ntriples(&text).map_err(|source| PersistError::Graph {
                path: path.clone(),
                source,
            })?;
            if graph_id(&graph) != id {
                return Err(PersistError::Corrupt {
                    path,
                    message: "content does not match its id".into(),
                });
            }
            snap.graphs.insert(id, graph);
        }
        let path = self.root.join("rules.swl");
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        snap.rules = parse_rules(&text).map_err(|source| PersistError::Rules { path, source })?;
        for id in self.read_manifest("sessions")? {
            let path = self.root.join("sessions").join(format!("{id}.json"));
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let journal: SessionJournal =
                serde_json::from_str(&text).map_err(|e| PersistError::Corrupt {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            if journal.id != id {
                return Err(PersistError::Corrupt {
                    path,
                    message: format!("journal id {:?} does not match file name", journal.id),
                });
            }
            let slot = SessionSlot::replay(&journal, diagnostic_rules)
                .map_err(|source| PersistError::Replay { id: id.clone(), source })?;
            snap.sessions.insert(id, slot);
        }
        Ok(snap)
    }
}

/// Write to a sibling temp file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PersistError> {
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let tmp = path.with_extension(format!("tmp{}", NEXT.fetch_add(1, Ordering::Relaxed)));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}
