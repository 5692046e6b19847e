//! Key elicitation: surrogate-key tagging, natural-key hypotheses and the
//! derived potential keys, kept in a session that is nothing more than a
//! snapshot plus the decisions applied to it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decision::{Decision, DecisionLog, DecisionRecord, LogError, Resolution, StabilityClass};
use crate::model::{AttributeTag, DatabaseSnapshot, ModelError, Relation, Row, Value};
use crate::normalize::HistorizationSpec;
use crate::profiling::{export_profile_chart, relation_profile, ChartDocument, RelationProfile};
use crate::similarity::{Canonicalizer, SimilarityPolicy};

#[derive(Debug, thiserror::Error)]
pub enum ElicitationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("relation {0} is not part of the session")]
    UnknownRelation(String),
    #[error("{relation}.{attribute} is not key-like ({duplicate_groups} duplicate groups); force to tag anyway")]
    NotKeyLike {
        relation: String,
        attribute: String,
        duplicate_groups: u64,
    },
    #[error("natural key of {relation} would contain surrogate attribute {attribute}")]
    ContainsSurrogate { relation: String, attribute: String },
    #[error("empty natural key proposed for {0}")]
    EmptyKey(String),
    #[error("{0} has no surrogate key")]
    NoSurrogateKey(String),
    #[error("{relation} declares a natural key {key:?}")]
    DeclaredNaturalKeyPresent { relation: String, key: Vec<String> },
    #[error("invalid decision: {0}")]
    InvalidDecision(String),
}

type Result<T, E = ElicitationError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisStatus {
    Proposed,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NaturalKeyHypothesis {
    pub attributes: Vec<String>,
    pub status: HypothesisStatus,
}

/// Expert resolution of one conflicting X-group on one attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictDecision {
    pub key: Vec<Option<String>>,
    pub attribute: String,
    pub resolution: Resolution,
}

/// Everything the session knows about one relation.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RelationState {
    pub tags: BTreeMap<String, AttributeTag>,
    pub natural_key: Option<NaturalKeyHypothesis>,
    pub similarity: SimilarityPolicy,
    pub stability: BTreeMap<String, StabilityClass>,
    pub historization: Option<HistorizationSpec>,
    pub resolutions: Vec<ConflictDecision>,
}

impl RelationState {
    pub fn accepted_natural_key(&self) -> Option<&[String]> {
        self.natural_key
            .as_ref()
            .filter(|h| h.status == HypothesisStatus::Accepted)
            .map(|h| h.attributes.as_slice())
    }

    pub fn tag(&self, attribute: &str) -> AttributeTag {
        self.tags.get(attribute).copied().unwrap_or(AttributeTag::Remaining)
    }

    /// Latest expert resolution for `key` on `attribute`.
    pub fn resolution(&self, key: &[Option<String>], attribute: &str) -> Option<&Resolution> {
        self.resolutions
            .iter()
            .rev()
            .find(|d| d.attribute == attribute && d.key == key)
            .map(|d| &d.resolution)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyValidationReport {
    pub candidate: Vec<String>,
    pub distinct_combinations: u64,
    pub relation_size: u64,
    pub duplicate_groups: u64,
    pub counterexample_sample: Vec<[Row; 2]>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CounterexampleGroup {
    pub key: Vec<Value>,
    pub rows: Vec<usize>,
    pub tuples: Vec<Row>,
}

const COUNTEREXAMPLE_SAMPLE: usize = 5;

#[derive(Debug, Clone)]
pub struct ElicitationSession {
    db: Arc<DatabaseSnapshot>,
    states: BTreeMap<String, RelationState>,
    log: DecisionLog,
}

impl ElicitationSession {
    /// Opens a session over `selected`; declared keys and foreign keys are
    /// tagged from the manifest, everything else starts as remaining.
    pub fn start<S: AsRef<str>>(db: Arc<DatabaseSnapshot>, selected: &[S]) -> Result<Self> {
        let mut states = BTreeMap::new();
        for name in selected {
            let rel = db
                .get(name.as_ref())
                .ok_or_else(|| ElicitationError::UnknownRelation(name.as_ref().to_string()))?;
            let schema = rel.schema();
            let mut tags = BTreeMap::new();
            for a in schema.attribute_names() {
                let tag = if schema.is_foreign_key_column(a) {
                    AttributeTag::ForeignKey
                } else if schema.declared_keys().any(|k| k.iter().any(|c| c == a)) {
                    AttributeTag::DeclaredKey
                } else {
                    AttributeTag::Remaining
                };
                tags.insert(a.to_string(), tag);
            }
            states.insert(
                rel.name().to_string(),
                RelationState {
                    tags,
                    ..RelationState::default()
                },
            );
        }
        Ok(Self {
            db,
            states,
            log: DecisionLog::new(),
        })
    }

    /// Session over every relation of `db`.
    pub fn start_all(db: Arc<DatabaseSnapshot>) -> Self {
        let names: Vec<String> = db.names().map(str::to_string).collect();
        Self::start(db, &names).expect("names come from the snapshot")
    }

    /// Rebuilds a session from a snapshot and a decision log, keeping the
    /// log's sequence numbers.
    pub fn replay(db: Arc<DatabaseSnapshot>, log: &DecisionLog) -> Result<Self> {
        let mut s = Self::start_all(db);
        for record in log.records() {
            s.apply(&record.relation, &record.decision)?;
            s.log.push_record(record.clone())?;
        }
        Ok(s)
    }

    pub fn snapshot(&self) -> &Arc<DatabaseSnapshot> {
        &self.db
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.states.keys().map(String::as_str)
    }

    pub fn state(&self, relation: &str) -> Result<&RelationState> {
        self.states
            .get(relation)
            .ok_or_else(|| ElicitationError::UnknownRelation(relation.to_string()))
    }

    fn state_mut(&mut self, relation: &str) -> Result<&mut RelationState> {
        self.states
            .get_mut(relation)
            .ok_or_else(|| ElicitationError::UnknownRelation(relation.to_string()))
    }

    fn relation(&self, relation: &str) -> Result<&Relation> {
        self.state(relation)?;
        Ok(self.db.relation(relation)?)
    }

    /// Validates and applies `decision`, then appends it to the log.
    pub fn decide(&mut self, relation: &str, decision: Decision) -> Result<&DecisionRecord> {
        self.apply(relation, &decision)?;
        Ok(self.log.append(relation, decision))
    }

    /// Like [`decide`](Self::decide) but keeps the record's sequence number.
    pub fn decide_record(&mut self, record: DecisionRecord) -> Result<()> {
        if record.seq < self.log.next_seq() {
            return Err(LogError::Sequence {
                line: self.log.len() + 1,
                seq: record.seq,
            }
            .into());
        }
        self.apply(&record.relation, &record.decision)?;
        self.log.push_record(record)?;
        Ok(())
    }

    pub fn tag_surrogate(&mut self, relation: &str, attribute: &str, force: bool) -> Result<&DecisionRecord> {
        self.decide(
            relation,
            Decision::TagSurrogate {
                attribute: attribute.to_string(),
                force,
            },
        )
    }

    pub fn accept_natural_key(&mut self, relation: &str, attributes: &[&str]) -> Result<&DecisionRecord> {
        self.decide(
            relation,
            Decision::DeclareNaturalKey {
                attributes: attributes.iter().map(|s| s.to_string()).collect(),
            },
        )
    }

    /// Checks `candidate` against the current instance and records it as
    /// the proposed hypothesis. Duplicates never block a proposal.
    pub fn propose_natural_key<S: AsRef<str>>(
        &mut self,
        relation: &str,
        candidate: &[S],
    ) -> Result<KeyValidationReport> {
        let attrs: Vec<String> = candidate.iter().map(|s| s.as_ref().to_string()).collect();
        self.check_natural_key(relation, &attrs)?;
        let report = self.validate_key(relation, &attrs)?;
        self.state_mut(relation)?.natural_key = Some(NaturalKeyHypothesis {
            attributes: attrs,
            status: HypothesisStatus::Proposed,
        });
        Ok(report)
    }

    pub fn reject_natural_key(&mut self, relation: &str) -> Result<()> {
        let state = self.state_mut(relation)?;
        if let Some(h) = &mut state.natural_key {
            h.status = HypothesisStatus::Rejected;
        }
        reset_member_tags(state);
        Ok(())
    }

    /// Uniqueness report of `candidate` under the relation's similarity
    /// policy.
    pub fn validate_key(&self, relation: &str, candidate: &[String]) -> Result<KeyValidationReport> {
        let r = self.relation(relation)?;
        let eq = &self.state(relation)?.similarity;
        let groups = counterexamples_under(r, candidate, usize::MAX, eq)?;
        let duplicates: u64 = groups.iter().map(|g| g.rows.len() as u64 - 1).sum();
        Ok(KeyValidationReport {
            candidate: candidate.to_vec(),
            distinct_combinations: r.len() as u64 - duplicates,
            relation_size: r.len() as u64,
            duplicate_groups: groups.len() as u64,
            counterexample_sample: groups
                .iter()
                .take(COUNTEREXAMPLE_SAMPLE)
                .map(|g| [g.tuples[0].clone(), g.tuples[1].clone()])
                .collect(),
        })
    }

    pub fn counterexamples<S: AsRef<str>>(
        &self,
        relation: &str,
        x: &[S],
        limit: usize,
    ) -> Result<Vec<CounterexampleGroup>> {
        let r = self.relation(relation)?;
        Ok(counterexamples_under(r, x, limit, &self.state(relation)?.similarity)?)
    }

    /// Surrogate-tagged attributes of `relation` in schema order.
    pub fn surrogate_keys(&self, relation: &str) -> Result<Vec<String>> {
        let r = self.relation(relation)?;
        let state = self.state(relation)?;
        Ok(r.schema()
            .attribute_names()
            .filter(|a| state.tag(a) == AttributeTag::SurrogateKey)
            .map(str::to_string)
            .collect())
    }

    /// The surrogate used as the relation's identifier downstream: the
    /// declared primary key when it is surrogate-tagged, else the first
    /// surrogate in schema order.
    pub fn primary_surrogate(&self, relation: &str) -> Result<Option<String>> {
        let sks = self.surrogate_keys(relation)?;
        let pk = self.relation(relation)?.schema().primary_key.clone();
        if let Some([pk]) = pk.as_deref() {
            if sks.contains(pk) {
                return Ok(Some(pk.clone()));
            }
        }
        Ok(sks.into_iter().next())
    }

    /// A declared key none of whose attributes is surrogate-tagged.
    pub fn declared_natural_key(&self, relation: &str) -> Result<Option<Vec<String>>> {
        let r = self.relation(relation)?;
        let state = self.state(relation)?;
        Ok(r.schema()
            .declared_keys()
            .find(|k| k.iter().all(|a| state.tag(a) != AttributeTag::SurrogateKey))
            .cloned())
    }

    /// The accepted natural key, or every non-surrogate attribute.
    pub fn potential_key(&self, relation: &str) -> Result<Vec<String>> {
        let sks = self.surrogate_keys(relation)?;
        if sks.is_empty() {
            return Err(ElicitationError::NoSurrogateKey(relation.to_string()));
        }
        if let Some(key) = self.declared_natural_key(relation)? {
            return Err(ElicitationError::DeclaredNaturalKeyPresent {
                relation: relation.to_string(),
                key,
            });
        }
        let state = self.state(relation)?;
        if let Some(nk) = state.accepted_natural_key() {
            return Ok(nk.to_vec());
        }
        Ok(self
            .relation(relation)?
            .schema()
            .attribute_names()
            .filter(|a| !sks.iter().any(|s| s == a))
            .map(str::to_string)
            .collect())
    }

    /// Natural key shown on profiles: accepted, else proposed.
    fn displayed_natural_key(&self, relation: &str) -> Result<Option<Vec<String>>> {
        Ok(self
            .state(relation)?
            .natural_key
            .as_ref()
            .filter(|h| h.status != HypothesisStatus::Rejected)
            .map(|h| h.attributes.clone()))
    }

    pub fn profile(&self, relation: &str) -> Result<RelationProfile> {
        let r = self.relation(relation)?;
        let nk = self.displayed_natural_key(relation)?;
        Ok(relation_profile(r, &self.state(relation)?.tags, nk.as_deref())?)
    }

    pub fn chart(&self, relation: &str) -> Result<ChartDocument> {
        Ok(export_profile_chart(&self.profile(relation)?))
    }

    /// Presentation order for the expert: relations referencing nothing
    /// first, then small relations with few foreign keys, then the rest.
    pub fn recommended_order(&self) -> Vec<String> {
        let mut buckets: [Vec<String>; 3] = Default::default();
        for name in self.states.keys() {
            let schema = self.db.get(name).expect("session relation").schema();
            let fks: BTreeSet<&str> = schema
                .foreign_keys
                .iter()
                .filter(|fk| self.states.contains_key(&fk.ref_relation) && fk.ref_relation != *name)
                .map(|fk| fk.ref_relation.as_str())
                .collect();
            let bucket = if fks.is_empty() {
                0
            } else if schema.arity() < 15 && schema.foreign_keys.len() <= 2 {
                1
            } else {
                2
            };
            buckets[bucket].push(name.clone());
        }
        buckets.concat()
    }

    fn check_natural_key(&self, relation: &str, attrs: &[String]) -> Result<()> {
        if attrs.is_empty() {
            return Err(ElicitationError::EmptyKey(relation.to_string()));
        }
        let r = self.relation(relation)?;
        let state = self.state(relation)?;
        r.positions(attrs)?;
        if let Some(a) = attrs.iter().find(|a| state.tag(a) == AttributeTag::SurrogateKey) {
            return Err(ElicitationError::ContainsSurrogate {
                relation: relation.to_string(),
                attribute: a.clone(),
            });
        }
        Ok(())
    }

    fn apply(&mut self, relation: &str, decision: &Decision) -> Result<()> {
        let schema = self.relation(relation)?.schema().clone();
        let attribute_of = |a: &str| {
            schema.attribute(a).cloned().ok_or_else(|| ModelError::UnknownAttribute {
                relation: relation.to_string(),
                attribute: a.to_string(),
            })
        };
        match decision {
            Decision::TagSurrogate { attribute, force } => self.apply_tag(relation, attribute, *force),
            Decision::DeclareNaturalKey { attributes } => {
                self.check_natural_key(relation, attributes)?;
                let state = self.state_mut(relation)?;
                reset_member_tags(state);
                for a in attributes {
                    if state.tag(a) == AttributeTag::Remaining {
                        state.tags.insert(a.clone(), AttributeTag::NaturalKeyMember);
                    }
                }
                state.natural_key = Some(NaturalKeyHypothesis {
                    attributes: attributes.clone(),
                    status: HypothesisStatus::Accepted,
                });
                Ok(())
            }
            Decision::SetSimilarity { attribute, canonicalizer } => {
                attribute_of(attribute)?;
                if schema.is_foreign_key_column(attribute) && *canonicalizer != Canonicalizer::Identity {
                    return Err(ElicitationError::InvalidDecision(format!(
                        "foreign key {relation}.{attribute} always compares by equality"
                    )));
                }
                self.state_mut(relation)?.similarity.set(attribute, *canonicalizer);
                Ok(())
            }
            Decision::ValidateStability { attribute, class } => {
                attribute_of(attribute)?;
                let state = self.state_mut(relation)?;
                if state.tag(attribute) == AttributeTag::SurrogateKey {
                    return Err(ElicitationError::InvalidDecision(format!(
                        "{relation}.{attribute} is a surrogate key"
                    )));
                }
                state.stability.insert(attribute.clone(), *class);
                Ok(())
            }
            Decision::ChooseHistorizationAttribute {
                source_relation,
                attribute,
                join_fk,
                output_name,
                new_relation,
            } => {
                let spec = self.historization_spec(
                    relation,
                    source_relation,
                    attribute,
                    join_fk.as_deref(),
                    output_name.as_deref(),
                    new_relation.as_deref(),
                )?;
                self.state_mut(relation)?.historization = Some(spec);
                Ok(())
            }
            Decision::ResolveConflict { key, attribute, resolution } => {
                let ty = attribute_of(attribute)?.ty;
                if let Resolution::Value(Some(text)) = resolution {
                    ty.parse(text).map_err(|e| {
                        ElicitationError::InvalidDecision(format!("{relation}.{attribute}: {e}"))
                    })?;
                }
                if let Ok(x) = self.potential_key(relation) {
                    if x.len() != key.len() {
                        return Err(ElicitationError::InvalidDecision(format!(
                            "conflict key of {relation} needs {} components, got {}",
                            x.len(),
                            key.len()
                        )));
                    }
                }
                self.state_mut(relation)?.resolutions.push(ConflictDecision {
                    key: key.clone(),
                    attribute: attribute.clone(),
                    resolution: resolution.clone(),
                });
                Ok(())
            }
        }
    }

    fn apply_tag(&mut self, relation: &str, attribute: &str, force: bool) -> Result<()> {
        let rel = self.relation(relation)?;
        let schema = rel.schema();
        rel.position(attribute)?;
        let state = self.state(relation)?;
        if state
            .accepted_natural_key()
            .is_some_and(|nk| nk.iter().any(|a| a == attribute))
        {
            return Err(ElicitationError::ContainsSurrogate {
                relation: relation.to_string(),
                attribute: attribute.to_string(),
            });
        }
        let targets_surrogate = schema.foreign_keys_on(attribute).any(|fk| {
            self.states
                .get(&fk.ref_relation)
                .is_some_and(|s| s.tag(&fk.ref_columns[0]) == AttributeTag::SurrogateKey)
        });
        if targets_surrogate {
            self.state_mut(relation)?
                .tags
                .insert(attribute.to_string(), AttributeTag::SurrogateForeignKey);
            return Ok(());
        }
        let declared = schema.declared_keys().any(|k| k.len() == 1 && k[0] == attribute);
        if !declared && !force {
            let groups = counterexamples_under(rel, &[attribute], usize::MAX, &SimilarityPolicy::exact())?;
            let nulls = rel.column(attribute)?.iter().any(|v| v.is_null());
            if !groups.is_empty() || nulls {
                return Err(ElicitationError::NotKeyLike {
                    relation: relation.to_string(),
                    attribute: attribute.to_string(),
                    duplicate_groups: groups.len() as u64,
                });
            }
        }
        self.state_mut(relation)?
            .tags
            .insert(attribute.to_string(), AttributeTag::SurrogateKey);
        let referencing: Vec<(String, String)> = self
            .db
            .relations()
            .flat_map(|s| {
                s.schema().foreign_keys.iter().filter_map(move |fk| {
                    let (col, target) = fk.unary()?;
                    (fk.ref_relation == relation && target == attribute)
                        .then(|| (s.name().to_string(), col.to_string()))
                })
            })
            .collect();
        for (s, col) in referencing {
            if let Some(st) = self.states.get_mut(&s) {
                if matches!(st.tag(&col), AttributeTag::ForeignKey | AttributeTag::Remaining) {
                    st.tags.insert(col, AttributeTag::SurrogateForeignKey);
                }
            }
        }
        Ok(())
    }

    fn historization_spec(
        &self,
        relation: &str,
        source: &str,
        attribute: &str,
        join_fk: Option<&str>,
        output_name: Option<&str>,
        new_relation: Option<&str>,
    ) -> Result<HistorizationSpec> {
        self.relation(relation)?;
        let src = self
            .db
            .get(source)
            .ok_or_else(|| ElicitationError::UnknownRelation(source.to_string()))?;
        src.position(attribute)?;
        let join_fk = if source == relation {
            None
        } else {
            let candidates: Vec<&str> = src
                .schema()
                .foreign_keys
                .iter()
                .filter(|fk| fk.ref_relation == relation)
                .filter_map(|fk| fk.unary().map(|(c, _)| c))
                .filter(|c| join_fk.is_none_or(|j| j == *c))
                .collect();
            match candidates.as_slice() {
                [one] => Some(one.to_string()),
                [] => {
                    return Err(ElicitationError::InvalidDecision(format!(
                        "{source} has no single-column foreign key {}to {relation}",
                        join_fk.map(|j| format!("{j} ")).unwrap_or_default()
                    )))
                }
                _ => {
                    return Err(ElicitationError::InvalidDecision(format!(
                        "{source} references {relation} more than once; name the join foreign key"
                    )))
                }
            }
        };
        let output_name = output_name.unwrap_or(attribute).to_string();
        let new_relation = new_relation
            .map(str::to_string)
            .unwrap_or_else(|| format!("{relation}_details"));
        if new_relation != relation && self.db.get(&new_relation).is_some() {
            return Err(ElicitationError::InvalidDecision(format!(
                "relation {new_relation} already exists"
            )));
        }
        Ok(HistorizationSpec {
            relation: relation.to_string(),
            source_relation: source.to_string(),
            attribute: attribute.to_string(),
            join_fk,
            output_name,
            new_relation,
        })
    }
}

fn reset_member_tags(state: &mut RelationState) {
    for tag in state.tags.values_mut() {
        if *tag == AttributeTag::NaturalKeyMember {
            *tag = AttributeTag::Remaining;
        }
    }
}

/// Groups of at least two rows agreeing on `x` (Null = Null), sorted by
/// their X values and truncated to `limit` groups.
pub fn counterexamples<S: AsRef<str>>(
    r: &Relation,
    x: &[S],
    limit: usize,
) -> Result<Vec<CounterexampleGroup>, ModelError> {
    counterexamples_under(r, x, limit, &SimilarityPolicy::exact())
}

pub fn counterexamples_under<S: AsRef<str>>(
    r: &Relation,
    x: &[S],
    limit: usize,
    eq: &SimilarityPolicy,
) -> Result<Vec<CounterexampleGroup>, ModelError> {
    let names: Vec<String> = x.iter().map(|s| s.as_ref().to_string()).collect();
    let pos = r.positions(&names)?;
    let mut groups: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
    for (i, row) in r.rows().iter().enumerate() {
        groups
            .entry(crate::profiling::group_key(row, &pos, &names, eq))
            .or_default()
            .push(i);
    }
    let mut out: Vec<CounterexampleGroup> = groups
        .into_iter()
        .filter(|(_, rows)| rows.len() > 1)
        .map(|(key, rows)| CounterexampleGroup {
            key,
            tuples: rows.iter().map(|&i| r.rows()[i].clone()).collect(),
            rows,
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out.truncate(limit);
    Ok(out)
}

/// Deterministic sample of `min(n, |r|)` rows, in relation order.
pub fn sample_tuples(r: &Relation, n: usize, seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, r.len(), n.min(r.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| r.rows()[i].clone()).collect()
}
