//! On-disk sessions: `<root>/sessions/<id>/{session.json, decisions.jsonl}`
//! plus `result/` once finalized. Everything else is a cache rebuilt from
//! the snapshot and the decision log.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use redhunt_core::auclean::{removing_au, verify_no_au, AuFinding, AuReport};
use redhunt_core::decision::{Decision, DecisionLog, DecisionRecord};
use redhunt_core::elicitation::ElicitationSession;
use redhunt_core::model::load_snapshot;
use redhunt_core::DatabaseSnapshot;
use serde::{Deserialize, Serialize};
use tokio::sync::RwLock;

use crate::error::ApiError;

pub const SESSION_FILE: &str = "session.json";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const RESULT_DIR: &str = "result";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Elicitation,
    Cleaning,
    Normalization,
    Done,
}

impl Phase {
    /// Phase in which a decision kind may be posted.
    pub fn of(decision: &Decision) -> Phase {
        if decision.is_elicitation() {
            Phase::Elicitation
        } else {
            Phase::Normalization
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SessionFile {
    id: String,
    snapshot_path: PathBuf,
    phase: Phase,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum JobStatus {
    Running,
    Succeeded,
    Failed { error: String },
}

/// Output of the cleaning job.
#[derive(Debug)]
pub struct CleanArtifacts {
    pub cleaned: DatabaseSnapshot,
    pub au: AuReport,
    pub verify: Vec<AuFinding>,
}

pub struct Session {
    pub id: String,
    pub dir: PathBuf,
    pub snapshot_path: PathBuf,
    pub phase: Phase,
    pub elicitation: ElicitationSession,
    pub clean: Option<Arc<CleanArtifacts>>,
    pub jobs: BTreeMap<u64, JobStatus>,
}

impl Session {
    pub fn create(root: &Path, snapshot_path: PathBuf) -> Result<Self, ApiError> {
        let db = load_snapshot(&snapshot_path).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let dir = sessions_dir(root).join(&id);
        fs::create_dir_all(&dir)?;
        fs::write(dir.join(DECISIONS_FILE), "")?;
        let session = Self {
            id,
            dir,
            snapshot_path,
            phase: Phase::Elicitation,
            elicitation: ElicitationSession::start_all(Arc::new(db)),
            clean: None,
            jobs: BTreeMap::new(),
        };
        session.persist()?;
        Ok(session)
    }

    /// Rebuilds a session from its directory, or `None` if there is none.
    pub fn open(root: &Path, id: &str) -> Result<Option<Self>, ApiError> {
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Ok(None);
        }
        let dir = sessions_dir(root).join(id);
        let Ok(text) = fs::read_to_string(dir.join(SESSION_FILE)) else {
            return Ok(None);
        };
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| ApiError::Internal(e.to_string()))?;
        let db = load_snapshot(&file.snapshot_path).map_err(|e| ApiError::Internal(e.to_string()))?;
        let log = DecisionLog::load(dir.join(DECISIONS_FILE))?;
        let elicitation = ElicitationSession::replay(Arc::new(db), &log)?;
        Ok(Some(Self {
            id: file.id,
            dir,
            snapshot_path: file.snapshot_path,
            phase: file.phase,
            elicitation,
            clean: None,
            jobs: BTreeMap::new(),
        }))
    }

    pub fn persist(&self) -> Result<(), ApiError> {
        let file = SessionFile {
            id: self.id.clone(),
            snapshot_path: self.snapshot_path.clone(),
            phase: self.phase,
        };
        let text = serde_json::to_string_pretty(&file).expect("session serializes");
        fs::write(self.dir.join(SESSION_FILE), text + "\n")?;
        Ok(())
    }

    pub fn log(&self) -> &DecisionLog {
        self.elicitation.log()
    }

    pub fn require_phase(&self, allowed: &[Phase]) -> Result<(), ApiError> {
        if allowed.contains(&self.phase) {
            Ok(())
        } else {
            Err(ApiError::conflict(format!(
                "session is in phase {:?}; this needs {:?}",
                self.phase, allowed
            )))
        }
    }

    pub fn advance(&mut self, to: Phase) -> Result<(), ApiError> {
        debug_assert!(to >= self.phase);
        if to != self.phase {
            self.phase = to;
            self.persist()?;
        }
        Ok(())
    }

    /// Validates `decision` against a copy of the session, appends it to the
    /// on-disk log, then makes it visible. `expected_seq`, when given, must
    /// be the next sequence number.
    pub fn decide(
        &mut self,
        relation: &str,
        decision: Decision,
        expected_seq: Option<u64>,
    ) -> Result<DecisionRecord, ApiError> {
        self.require_phase(&[Phase::of(&decision)])?;
        let next = self.log().next_seq();
        if let Some(seq) = expected_seq.filter(|&s| s != next) {
            return Err(ApiError::Conflict {
                message: format!("sequence number {seq} is stale; next is {next}"),
                details: serde_json::json!({ "next_seq": next }),
            });
        }
        let mut staged = self.elicitation.clone();
        let record = staged.decide(relation, decision)?.clone();
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        OpenOptions::new()
            .append(true)
            .open(self.dir.join(DECISIONS_FILE))?
            .write_all(line.as_bytes())?;
        self.elicitation = staged;
        Ok(record)
    }

    /// The cleaning artifacts, recomputed if the cache was dropped.
    pub fn clean_artifacts(&mut self) -> Result<Arc<CleanArtifacts>, ApiError> {
        if let Some(c) = &self.clean {
            return Ok(c.clone());
        }
        let c = Arc::new(run_clean(&self.elicitation)?);
        self.clean = Some(c.clone());
        Ok(c)
    }
}

pub fn run_clean(session: &ElicitationSession) -> Result<CleanArtifacts, ApiError> {
    let (cleaned, au) = removing_au(session)?;
    let verify = verify_no_au(&cleaned, session)?;
    Ok(CleanArtifacts { cleaned, au, verify })
}

pub fn sessions_dir(root: &Path) -> PathBuf {
    root.join("sessions")
}

pub type SessionHandle = Arc<RwLock<Session>>;
