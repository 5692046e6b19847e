//! The decision log: an ordered, replayable record of every expert choice.
//!
//! Stored as newline-delimited JSON, one record per line:
//!
//! ```text
//! {"seq":1,"relation":"Animal","kind":"TagSurrogate","payload":{"attribute":"hash_id"}}
//! ```
//!
//! Values inside payloads are given in their canonical text form (the same
//! form used in the CSV files) and parsed against the attribute type at
//! replay time; `null` stands for Null.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::similarity::Canonicalizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityClass {
    Stable,
    Unstable,
}

/// Automatic conflict-resolution rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictRule {
    /// Most frequent candidate; ties go to the smallest value.
    MostFrequent,
    /// Value of the row with the lowest original row ordinal.
    FirstByProvenance,
}

impl ConflictRule {
    pub fn id(self) -> &'static str {
        match self {
            ConflictRule::MostFrequent => "most_frequent",
            ConflictRule::FirstByProvenance => "first_by_provenance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "most_frequent" | "most-frequent" => Some(ConflictRule::MostFrequent),
            "first_by_provenance" | "first-by-provenance" => Some(ConflictRule::FirstByProvenance),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    /// Explicit value, in canonical text form (`None` = Null).
    Value(Option<String>),
    Rule(ConflictRule),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum Decision {
    TagSurrogate {
        attribute: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        force: bool,
    },
    DeclareNaturalKey {
        attributes: Vec<String>,
    },
    SetSimilarity {
        attribute: String,
        canonicalizer: Canonicalizer,
    },
    ValidateStability {
        attribute: String,
        class: StabilityClass,
    },
    ChooseHistorizationAttribute {
        source_relation: String,
        attribute: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        join_fk: Option<String>,
        /// Name of the attribute in the new relation (defaults to `attribute`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        output_name: Option<String>,
        /// Name of the new relation (defaults to `<relation>_details`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        new_relation: Option<String>,
    },
    ResolveConflict {
        /// Natural-key value of the conflicting group.
        key: Vec<Option<String>>,
        attribute: String,
        resolution: Resolution,
    },
}

impl Decision {
    pub fn kind(&self) -> &'static str {
        match self {
            Decision::TagSurrogate { .. } => "TagSurrogate",
            Decision::DeclareNaturalKey { .. } => "DeclareNaturalKey",
            Decision::SetSimilarity { .. } => "SetSimilarity",
            Decision::ValidateStability { .. } => "ValidateStability",
            Decision::ChooseHistorizationAttribute { .. } => "ChooseHistorizationAttribute",
            Decision::ResolveConflict { .. } => "ResolveConflict",
        }
    }

    /// Decisions belonging to key elicitation (as opposed to normalization).
    pub fn is_elicitation(&self) -> bool {
        matches!(
            self,
            Decision::TagSurrogate { .. }
                | Decision::DeclareNaturalKey { .. }
                | Decision::SetSimilarity { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub seq: u64,
    pub relation: String,
    #[serde(flatten)]
    pub decision: Decision,
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("decision log line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("decision log line {line}: sequence number {seq} is not increasing")]
    Sequence { line: usize, seq: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecisionLog {
    records: Vec<DecisionRecord>,
}

impl DecisionLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[DecisionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.records.last().map_or(1, |r| r.seq + 1)
    }

    pub fn append(&mut self, relation: impl Into<String>, decision: Decision) -> &DecisionRecord {
        let seq = self.next_seq();
        self.records.push(DecisionRecord {
            seq,
            relation: relation.into(),
            decision,
        });
        self.records.last().expect("just pushed")
    }

    /// Appends a record as-is; its sequence number must exceed the last one.
    pub fn push_record(&mut self, record: DecisionRecord) -> Result<(), LogError> {
        if let Some(last) = self.records.last() {
            if record.seq <= last.seq {
                return Err(LogError::Sequence {
                    line: self.records.len() + 1,
                    seq: record.seq,
                });
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, LogError> {
        let mut log = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: DecisionRecord = serde_json::from_str(line).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            log.push_record(record).map_err(|e| match e {
                LogError::Sequence { seq, .. } => LogError::Sequence { line: i + 1, seq },
                other => other,
            })?;
        }
        Ok(log)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn store(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

impl FromIterator<(String, Decision)> for DecisionLog {
    fn from_iter<T: IntoIterator<Item = (String, Decision)>>(iter: T) -> Self {
        let mut log = Self::new();
        for (rel, d) in iter {
            log.append(rel, d);
        }
        log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_wire_format() {
        let mut log = DecisionLog::new();
        log.append(
            "Animal",
            Decision::TagSurrogate {
                attribute: "hash_id".into(),
                force: false,
            },
        );
        log.append(
            "Animal",
            Decision::ResolveConflict {
                key: vec![Some("614".into())],
                attribute: "dob".into(),
                resolution: Resolution::Value(Some("2018-01-18".into())),
            },
        );
        let text = log.to_jsonl();
        let first = text.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first).unwrap();
        assert_eq!(v["seq"], 1);
        assert_eq!(v["kind"], "TagSurrogate");
        assert_eq!(v["relation"], "Animal");
        assert_eq!(v["payload"]["attribute"], "hash_id");
        assert_eq!(DecisionLog::parse(&text).unwrap(), log);
    }

    #[test]
    fn rejects_non_increasing_seq() {
        let text = "{\"seq\":2,\"relation\":\"A\",\"kind\":\"DeclareNaturalKey\",\"payload\":{\"attributes\":[\"x\"]}}\n\
                    {\"seq\":2,\"relation\":\"A\",\"kind\":\"DeclareNaturalKey\",\"payload\":{\"attributes\":[\"x\"]}}\n";
        assert!(matches!(
            DecisionLog::parse(text),
            Err(LogError::Sequence { line: 2, .. })
        ));
    }

    #[test]
    fn rejects_unknown_kind() {
        let text = "{\"seq\":1,\"relation\":\"A\",\"kind\":\"Nope\",\"payload\":{}}";
        assert!(matches!(DecisionLog::parse(text), Err(LogError::Parse { line: 1, .. })));
    }

    #[test]
    fn rule_resolution_format() {
        let d = Decision::ResolveConflict {
            key: vec![None],
            attribute: "a".into(),
            resolution: Resolution::Rule(ConflictRule::MostFrequent),
        };
        let v = serde_json::to_value(&d).unwrap();
        assert_eq!(v["payload"]["resolution"]["rule"], "most_frequent");
    }
}
