//! Headless replay of a decision log through elicitation, cleaning and
//! normalization, with the on-disk report layout used by the CLI and the
//! HTTP service.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::auclean::{removing_au, verify_no_au, AuError, AuFinding, AuReport};
use crate::decision::{DecisionLog, LogError};
use crate::elicitation::{ElicitationError, ElicitationSession};
use crate::fraction::Fraction;
use crate::model::{load_snapshot, store_snapshot, DatabaseSnapshot, ModelError};
use crate::normalize::{
    apply_expert_overrides, chase_clean, classify_stability, decompose, reduce, redeclare_constraints,
    ChaseTarget, ConflictPolicy, ConflictReport, DecomposeReport, DetailKeys, NormalizeError, RelationKeys,
    StabilityClassification,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;
pub const EXIT_CYCLIC: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const REPORTS_DIR: &str = "reports";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Elicitation(#[from] ElicitationError),
    #[error(transparent)]
    Au(#[from] AuError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Au(AuError::CyclicAfterRestriction(_)) => EXIT_CYCLIC,
            PipelineError::Io(_)
            | PipelineError::Log(LogError::Io(_))
            | PipelineError::Model(
                ModelError::Io(_) | ModelError::MissingManifest(_) | ModelError::MissingRelationFile { .. },
            ) => EXIT_IO,
            _ => EXIT_FAILURE,
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineConfig {
    pub policy: ConflictPolicy,
    /// Largest stability value still classified stable by the machine.
    pub threshold: Fraction,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            policy: ConflictPolicy::ExpertOnly,
            threshold: Fraction::zero(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub snapshot: DatabaseSnapshot,
    pub au: AuReport,
    pub verify: Vec<AuFinding>,
    pub stability: Vec<StabilityClassification>,
    pub decompositions: Vec<DecomposeReport>,
    pub conflicts: ConflictReport,
    /// Relations with unstable attributes but no historization decision.
    pub missing_historization: Vec<String>,
    pub redeclared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub status: &'static str,
    pub exit_code: i32,
    pub processing_order: Vec<String>,
    pub remaining_au_findings: usize,
    pub unresolved_conflicts: usize,
    pub missing_historization: Vec<String>,
    pub constraints_redeclared: bool,
    pub relation_sizes: BTreeMap<String, usize>,
}

impl PipelineOutcome {
    pub fn is_complete(&self) -> bool {
        self.verify.is_empty() && self.conflicts.unresolved_count() == 0 && self.missing_historization.is_empty()
    }

    pub fn exit_code(&self) -> i32 {
        if !self.verify.is_empty() {
            EXIT_FAILURE
        } else if !self.is_complete() {
            EXIT_INCOMPLETE
        } else {
            EXIT_OK
        }
    }

    pub fn summary(&self) -> Summary {
        let code = self.exit_code();
        Summary {
            status: match code {
                EXIT_OK => "ok",
                EXIT_INCOMPLETE => "incomplete",
                _ => "failed",
            },
            exit_code: code,
            processing_order: self.au.order.clone(),
            remaining_au_findings: self.verify.len(),
            unresolved_conflicts: self.conflicts.unresolved_count(),
            missing_historization: self.missing_historization.clone(),
            constraints_redeclared: self.redeclared,
            relation_sizes: self.snapshot.relations().map(|r| (r.name().to_string(), r.len())).collect(),
        }
    }

    /// Writes the snapshot to `out` and every report to `out/reports`.
    pub fn write(&self, out: &Path) -> Result<()> {
        prepare_output(out)?;
        store_snapshot(&self.snapshot, out)?;
        let reports = out.join(REPORTS_DIR);
        fs::create_dir_all(&reports)?;
        write_json(&reports.join("au.json"), &self.au)?;
        write_json(&reports.join("verify.json"), &self.verify)?;
        write_json(&reports.join("stability.json"), &self.stability)?;
        write_json(&reports.join("decompositions.json"), &self.decompositions)?;
        write_json(&reports.join("conflicts.json"), &self.conflicts)?;
        write_json(&reports.join("summary.json"), &self.summary())?;
        Ok(())
    }
}

pub(crate) fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Removes the files a previous run may have left in `out`.
fn prepare_output(out: &Path) -> Result<()> {
    if !out.exists() {
        fs::create_dir_all(out)?;
        return Ok(());
    }
    for entry in fs::read_dir(out)? {
        let path = entry?.path();
        let stale = path.extension().is_some_and(|e| e == "csv") || path.file_name().is_some_and(|n| n == "manifest.json");
        if stale {
            fs::remove_file(&path)?;
        }
    }
    let reports = out.join(REPORTS_DIR);
    if reports.is_dir() {
        fs::remove_dir_all(reports)?;
    }
    Ok(())
}

/// Replays `log` and runs the cleaning only.
pub fn run_clean(db: Arc<DatabaseSnapshot>, log: &DecisionLog) -> Result<(DatabaseSnapshot, AuReport, Vec<AuFinding>)> {
    let session = ElicitationSession::replay(db, log)?;
    let (cleaned, au) = removing_au(&session)?;
    let verify = verify_no_au(&cleaned, &session)?;
    Ok((cleaned, au, verify))
}

/// Stability classification of every cleaned relation, expert overrides
/// applied.
pub fn classify_all(
    session: &ElicitationSession,
    cleaned: &DatabaseSnapshot,
    order: &[String],
    threshold: Fraction,
) -> Result<Vec<StabilityClassification>> {
    let mut out = Vec::new();
    for name in order {
        let state = session.state(name)?;
        let sks = session.surrogate_keys(name)?;
        let x = session.potential_key(name)?;
        let c = classify_stability(cleaned.relation(name)?, &x, &sks, threshold, &state.similarity)?;
        out.push(apply_expert_overrides(c, &state.stability)?);
    }
    Ok(out)
}

/// Replays `log` over `db` and runs every stage.
pub fn run(db: Arc<DatabaseSnapshot>, log: &DecisionLog, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let session = ElicitationSession::replay(db, log)?;
    let (cleaned, au) = removing_au(&session)?;
    let verify = verify_no_au(&cleaned, &session)?;
    normalize_cleaned(&session, cleaned, au, verify, config)
}

/// The stages after cleaning: stability, decomposition, chase, reduction
/// and, when nothing is left open, constraint re-declaration.
pub fn normalize_cleaned(
    session: &ElicitationSession,
    cleaned: DatabaseSnapshot,
    au: AuReport,
    verify: Vec<AuFinding>,
    config: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let order = au.order.clone();
    let stability = classify_all(session, &cleaned, &order, config.threshold)?;

    let mut current = cleaned;
    let mut decompositions = Vec::new();
    let mut missing_historization = Vec::new();
    let mut details = Vec::new();
    for c in &stability {
        if c.unstable().is_empty() {
            continue;
        }
        let Some(spec) = &session.state(&c.relation)?.historization else {
            missing_historization.push(c.relation.clone());
            continue;
        };
        let sks = session.surrogate_keys(&c.relation)?;
        let primary = session.primary_surrogate(&c.relation)?.expect("node has a surrogate");
        let (next, report) = decompose(&current, c, &sks, &primary, spec)?;
        current = next;
        if let Some(report) = report {
            details.push(DetailKeys {
                relation: report.new_relation.clone(),
                parent: report.relation.clone(),
                surrogate: report.moved[0].clone(),
                historization: spec.output_name.clone(),
            });
            decompositions.push(report);
        }
    }

    let stable: Vec<Vec<String>> = stability.iter().map(StabilityClassification::stable).collect();
    let mut targets = Vec::new();
    for (c, attributes) in stability.iter().zip(stable) {
        let state = session.state(&c.relation)?;
        targets.push(ChaseTarget {
            relation: c.relation.clone(),
            key: c.natural_key.clone(),
            attributes,
            eq: &state.similarity,
            decisions: &state.resolutions,
        });
    }
    let (chased, conflicts) = chase_clean(&current, &targets, &config.policy)?;
    let mut snapshot = reduce(&chased);

    let mut outcome = PipelineOutcome {
        snapshot: DatabaseSnapshot::default(),
        au,
        verify,
        stability,
        decompositions,
        conflicts,
        missing_historization,
        redeclared: false,
    };
    if outcome.is_complete() {
        let mut keys = Vec::new();
        for name in &order {
            let primary = session.primary_surrogate(name)?.expect("node has a surrogate");
            keys.push(RelationKeys {
                relation: name.clone(),
                other_surrogates: session
                    .surrogate_keys(name)?
                    .into_iter()
                    .filter(|s| *s != primary)
                    .collect(),
                primary,
                natural_key: session.potential_key(name)?,
            });
        }
        snapshot = redeclare_constraints(snapshot, &keys, &details)?;
        outcome.redeclared = true;
    }
    outcome.snapshot = snapshot;
    Ok(outcome)
}

/// Loads the snapshot and log from disk, runs every stage and writes the
/// result to `out`.
pub fn run_pipeline(snapshot: &Path, log: &Path, out: &Path, config: &PipelineConfig) -> Result<PipelineOutcome> {
    let db = Arc::new(load_snapshot(snapshot)?);
    let log = DecisionLog::load(log)?;
    let outcome = run(db, &log, config)?;
    outcome.write(out)?;
    Ok(outcome)
}
