//! Post-cleaning normalization: stability classification of the non-key
//! attributes, decomposition of the unstable ones into a historized
//! relation, chase of the remaining conflicts and set reduction.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::decision::{ConflictRule, Resolution, StabilityClass};
use crate::elicitation::ConflictDecision;
use crate::fraction::Fraction;
use crate::model::{
    validate_constraints, DatabaseSnapshot, ForeignKey, ModelError, Relation, RelationSchema,
    ValidationReport, Value,
};
use crate::profiling::{g3_grouped, group_key, row_groups, ProfilingError};
use crate::similarity::SimilarityPolicy;

#[derive(Debug, thiserror::Error)]
pub enum NormalizeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Profiling(#[from] ProfilingError),
    #[error("stability override on {relation}.{attribute}, which is not classified")]
    UnknownOverride { relation: String, attribute: String },
    #[error("{{{surrogate}, {attribute}}} is not a key of {relation} ({duplicates} duplicate rows); choose another historization attribute")]
    KeyCheckFailed {
        relation: String,
        surrogate: String,
        attribute: String,
        duplicates: usize,
    },
    #[error("{relation}.{attribute} carries no pre-cleaning values; run the cleaning first")]
    MissingProvenance { relation: String, attribute: String },
    #[error("invalid historization for {relation}: {message}")]
    InvalidHistorization { relation: String, message: String },
    #[error("constraints violated after cleaning: {} findings", .0.len())]
    ConstraintViolatedPostClean(ValidationReport),
}

type Result<T, E = NormalizeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityEntry {
    pub attribute: String,
    pub value: Fraction,
    pub machine: StabilityClass,
    #[serde(rename = "override", skip_serializing_if = "Option::is_none")]
    pub expert: Option<StabilityClass>,
    #[serde(rename = "final")]
    pub class: StabilityClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StabilityClassification {
    pub relation: String,
    pub natural_key: Vec<String>,
    pub threshold: Fraction,
    pub entries: Vec<StabilityEntry>,
}

impl StabilityClassification {
    fn with_class(&self, class: StabilityClass) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.class == class)
            .map(|e| e.attribute.clone())
            .collect()
    }

    /// Attributes finally classified stable, in schema order.
    pub fn stable(&self) -> Vec<String> {
        self.with_class(StabilityClass::Stable)
    }

    /// Attributes finally classified unstable, in schema order.
    pub fn unstable(&self) -> Vec<String> {
        self.with_class(StabilityClass::Unstable)
    }

    pub fn entry(&self, attribute: &str) -> Option<&StabilityEntry> {
        self.entries.iter().find(|e| e.attribute == attribute)
    }
}

/// Stability of every attribute outside `x` and the surrogates is
/// g3(x -> A); it is machine-stable when at most `threshold`.
pub fn classify_stability(
    r: &Relation,
    x: &[String],
    surrogates: &[String],
    threshold: Fraction,
    eq: &SimilarityPolicy,
) -> Result<StabilityClassification> {
    let mut entries = Vec::new();
    let groups = row_groups(r, x, eq)?;
    for a in r.schema().attribute_names() {
        if x.iter().any(|k| k == a) || surrogates.iter().any(|s| s == a) {
            continue;
        }
        let value = g3_grouped(r, &groups, a, eq)?;
        let machine = if value <= threshold {
            StabilityClass::Stable
        } else {
            StabilityClass::Unstable
        };
        entries.push(StabilityEntry {
            attribute: a.to_string(),
            value,
            machine,
            expert: None,
            class: machine,
        });
    }
    Ok(StabilityClassification {
        relation: r.name().to_string(),
        natural_key: x.to_vec(),
        threshold,
        entries,
    })
}

pub fn apply_expert_overrides(
    mut c: StabilityClassification,
    overrides: &BTreeMap<String, StabilityClass>,
) -> Result<StabilityClassification> {
    for (attribute, class) in overrides {
        let entry = c
            .entries
            .iter_mut()
            .find(|e| &e.attribute == attribute)
            .ok_or_else(|| NormalizeError::UnknownOverride {
                relation: c.relation.clone(),
                attribute: attribute.clone(),
            })?;
        entry.expert = Some(*class);
        entry.class = *class;
    }
    Ok(c)
}

/// Where the historization attribute comes from and how the split-off
/// relation is named.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistorizationSpec {
    pub relation: String,
    pub source_relation: String,
    pub attribute: String,
    /// Foreign key of the source relation used to reach `relation`;
    /// `None` when the attribute belongs to `relation` itself.
    pub join_fk: Option<String>,
    pub output_name: String,
    pub new_relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecomposeReport {
    pub relation: String,
    pub new_relation: String,
    pub kept: Vec<String>,
    pub moved: Vec<String>,
    /// Surrogate values of rows that no source row points to.
    pub orphans: Vec<Value>,
    /// Rows dropped because an earlier row had the same surrogate and
    /// unstable values.
    pub collapsed: usize,
}

/// Splits `c.relation` into its stable part (same name) and a relation
/// holding the surrogate, the historization attribute and the unstable
/// attributes. With no unstable attribute the snapshot is returned as is.
pub fn decompose(
    db: &DatabaseSnapshot,
    c: &StabilityClassification,
    surrogates: &[String],
    primary: &str,
    h: &HistorizationSpec,
) -> Result<(DatabaseSnapshot, Option<DecomposeReport>)> {
    let unstable = c.unstable();
    if unstable.is_empty() {
        return Ok((db.clone(), None));
    }
    let r = db.relation(&c.relation)?;
    let invalid = |message: String| NormalizeError::InvalidHistorization {
        relation: c.relation.clone(),
        message,
    };
    let kept: Vec<String> = r
        .schema()
        .attribute_names()
        .filter(|a| !unstable.iter().any(|u| u == a))
        .map(str::to_string)
        .collect();
    let r1 = r.project(&c.relation, &kept)?;

    let (surrogate, source_value): (String, Box<dyn Fn(usize) -> Vec<Value> + '_>) = match &h.join_fk {
        None => {
            let p = r.position(&h.attribute)?;
            if unstable.contains(&h.attribute) {
                return Err(invalid(format!("{} is itself unstable", h.attribute)));
            }
            let rows = r.rows();
            (primary.to_string(), Box::new(move |i| vec![rows[i][p].clone()]))
        }
        Some(fk) => {
            let s = db.relation(&h.source_relation)?;
            let fkdef = s
                .schema()
                .foreign_keys_on(fk)
                .find(|d| d.ref_relation == c.relation)
                .ok_or_else(|| invalid(format!("{}.{fk} does not reference it", h.source_relation)))?;
            let target = fkdef.ref_columns[0].clone();
            if !surrogates.contains(&target) {
                return Err(invalid(format!("{fk} references {target}, which is not a surrogate")));
            }
            let original = r.provenance(&target).ok_or_else(|| NormalizeError::MissingProvenance {
                relation: c.relation.clone(),
                attribute: target.clone(),
            })?;
            let op = s.position(&h.attribute)?;
            let mut by_original: HashMap<&Value, Vec<usize>> = HashMap::new();
            for j in 0..s.len() {
                let v = s.original_value(j, fk)?;
                if !v.is_null() {
                    by_original.entry(v).or_default().push(j);
                }
            }
            let rows = s.rows();
            let matches: Vec<Vec<Value>> = original
                .iter()
                .map(|v| {
                    by_original
                        .get(v)
                        .map(|js| js.iter().map(|&j| rows[j][op].clone()).collect())
                        .unwrap_or_default()
                })
                .collect();
            (target, Box::new(move |i| matches[i].clone()))
        }
    };

    let sp = r.position(&surrogate)?;
    let up = r.positions(&unstable)?;
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by_key(|&i| r.ordinals()[i]);
    let mut seen: HashSet<Vec<&Value>> = HashSet::new();
    let mut rows = Vec::new();
    let mut orphans = Vec::new();
    let mut collapsed = 0;
    for i in order {
        let row = &r.rows()[i];
        let fingerprint: Vec<&Value> = std::iter::once(&row[sp]).chain(up.iter().map(|&p| &row[p])).collect();
        if !seen.insert(fingerprint) {
            collapsed += 1;
            continue;
        }
        let mut os = source_value(i);
        if os.is_empty() {
            orphans.push(row[sp].clone());
            os.push(Value::Null);
        }
        for o in os {
            let mut out = vec![row[sp].clone(), o];
            out.extend(up.iter().map(|&p| row[p].clone()));
            rows.push(out);
        }
    }

    let source = db.relation(&h.source_relation)?;
    let mut o_attr = source
        .schema()
        .attribute(&h.attribute)
        .cloned()
        .ok_or_else(|| invalid(format!("unknown attribute {}", h.attribute)))?;
    o_attr.name = h.output_name.clone();
    o_attr.nullable = true;
    let mut attrs = vec![r.schema().attribute(&surrogate).cloned().expect("surrogate exists"), o_attr];
    attrs.extend(up.iter().map(|&p| r.schema().attributes[p].clone()));
    let mut names = HashSet::new();
    if let Some(dup) = attrs.iter().find(|a| !names.insert(a.name.as_str())) {
        return Err(invalid(format!("attribute {} would appear twice", dup.name)));
    }
    let moved: Vec<String> = attrs.iter().map(|a| a.name.clone()).collect();
    let r2 = Relation::from_rows(RelationSchema::new(&h.new_relation, attrs), rows)?;

    let mut keys: HashMap<(&Value, &Value), usize> = HashMap::new();
    for row in r2.rows() {
        *keys.entry((&row[0], &row[1])).or_default() += 1;
    }
    let duplicates: usize = keys.values().map(|n| n - 1).sum();
    if duplicates > 0 {
        return Err(NormalizeError::KeyCheckFailed {
            relation: h.new_relation.clone(),
            surrogate,
            attribute: h.output_name.clone(),
            duplicates,
        });
    }

    let mut map = db.clone().into_map();
    map.insert(c.relation.clone(), Arc::new(r1));
    map.insert(h.new_relation.clone(), Arc::new(r2));
    let report = DecomposeReport {
        relation: c.relation.clone(),
        new_relation: h.new_relation.clone(),
        kept,
        moved,
        orphans,
        collapsed,
    };
    Ok((DatabaseSnapshot::from_map(map), Some(report)))
}

/// How conflicts without an expert decision are settled.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Leave them open.
    #[default]
    ExpertOnly,
    Rule(ConflictRule),
    /// Per `relation.attribute` rule; unlisted attributes stay open.
    PerAttribute(BTreeMap<String, ConflictRule>),
}

impl ConflictPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "expert_only" | "expert-only" | "expert" => Some(ConflictPolicy::ExpertOnly),
            other => ConflictRule::parse(other).map(ConflictPolicy::Rule),
        }
    }

    fn rule_for(&self, relation: &str, attribute: &str) -> Option<ConflictRule> {
        match self {
            ConflictPolicy::ExpertOnly => None,
            ConflictPolicy::Rule(r) => Some(*r),
            ConflictPolicy::PerAttribute(rules) => rules.get(&format!("{relation}.{attribute}")).copied(),
        }
    }
}

/// One relation to chase: groups are formed on `key`, and every attribute
/// of `attributes` is made single-valued within each group.
#[derive(Debug, Clone)]
pub struct ChaseTarget<'a> {
    pub relation: String,
    pub key: Vec<String>,
    pub attributes: Vec<String>,
    pub eq: &'a SimilarityPolicy,
    pub decisions: &'a [ConflictDecision],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Candidate {
    pub value: Value,
    pub count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictSource {
    Expert,
    Rule,
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub relation: String,
    pub key: Vec<Option<String>>,
    pub attribute: String,
    pub candidates: Vec<Candidate>,
    pub chosen: Option<Value>,
    pub source: ConflictSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<ConflictRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConflictReport {
    pub conflicts: Vec<Conflict>,
}

impl ConflictReport {
    pub fn unresolved(&self) -> impl Iterator<Item = &Conflict> {
        self.conflicts.iter().filter(|c| c.source == ConflictSource::Unresolved)
    }

    pub fn unresolved_count(&self) -> usize {
        self.unresolved().count()
    }
}

/// Makes every key group single-valued on the target attributes. Since
/// the chased attributes are disjoint from the key, one pass reaches the
/// fixpoint.
pub fn chase_clean(
    db: &DatabaseSnapshot,
    targets: &[ChaseTarget<'_>],
    policy: &ConflictPolicy,
) -> Result<(DatabaseSnapshot, ConflictReport)> {
    let mut map = db.clone().into_map();
    let mut report = ConflictReport::default();
    for t in targets {
        let Some(r) = map.get(&t.relation) else {
            return Err(ModelError::UnknownRelation(t.relation.clone()).into());
        };
        let mut writes: Vec<(usize, usize, Value)> = Vec::new();
        let kp = r.positions(&t.key)?;
        // Bucket rows by group; singleton groups cannot conflict.
        let (gid, count) = row_groups(r, &t.key, t.eq)?;
        let mut start = vec![0usize; count + 1];
        for &g in &gid {
            start[g + 1] += 1;
        }
        for g in 0..count {
            start[g + 1] += start[g];
        }
        let mut fill = start.clone();
        let mut bucketed = vec![0usize; gid.len()];
        for (i, &g) in gid.iter().enumerate() {
            bucketed[fill[g]] = i;
            fill[g] += 1;
        }
        let mut groups: Vec<(Vec<Value>, &[usize])> = (0..count)
            .filter(|&g| start[g + 1] - start[g] > 1)
            .map(|g| {
                let rows = &bucketed[start[g]..start[g + 1]];
                (group_key(&r.rows()[rows[0]], &kp, &t.key, t.eq), rows)
            })
            .collect();
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        for a in &t.attributes {
            let ap = r.position(a)?;
            let ty = r.schema().attributes[ap].ty;
            for (key, rows) in &groups {
                let first_value = &r.rows()[rows[0]][ap];
                if rows.iter().all(|&i| r.rows()[i][ap] == *first_value) {
                    continue;
                }
                let mut counts: BTreeMap<&Value, u64> = BTreeMap::new();
                for &i in rows.iter() {
                    *counts.entry(&r.rows()[i][ap]).or_default() += 1;
                }
                if counts.len() < 2 {
                    continue;
                }
                let mut candidates: Vec<Candidate> = counts
                    .into_iter()
                    .map(|(v, count)| Candidate { value: v.clone(), count })
                    .collect();
                candidates.sort_by(|x, y| x.value.representative_cmp(&y.value));
                let key_text: Vec<Option<String>> = key.iter().map(Value::to_text).collect();
                let expert = t
                    .decisions
                    .iter()
                    .rev()
                    .find(|d| &d.attribute == a && d.key == key_text)
                    .map(|d| &d.resolution);
                let first = || {
                    let i = *rows.iter().min_by_key(|&&i| r.ordinals()[i]).expect("non-empty group");
                    r.rows()[i][ap].clone()
                };
                let by_rule = |rule: ConflictRule| match rule {
                    ConflictRule::MostFrequent => most_frequent(&candidates),
                    ConflictRule::FirstByProvenance => first(),
                };
                let (chosen, source, rule) = match expert {
                    Some(Resolution::Value(text)) => {
                        let v = match text {
                            None => Value::Null,
                            Some(s) => ty.parse(s).map_err(|message| ModelError::TypeParse {
                                relation: t.relation.clone(),
                                row: rows[0],
                                attribute: a.clone(),
                                message,
                            })?,
                        };
                        (Some(v), ConflictSource::Expert, None)
                    }
                    Some(Resolution::Rule(rule)) => (Some(by_rule(*rule)), ConflictSource::Expert, Some(*rule)),
                    None => match policy.rule_for(&t.relation, a) {
                        Some(rule) => (Some(by_rule(rule)), ConflictSource::Rule, Some(rule)),
                        None => (None, ConflictSource::Unresolved, None),
                    },
                };
                if let Some(v) = &chosen {
                    writes.extend(rows.iter().map(|&i| (i, ap, v.clone())));
                }
                report.conflicts.push(Conflict {
                    relation: t.relation.clone(),
                    key: key_text,
                    attribute: a.clone(),
                    candidates,
                    chosen,
                    source,
                    rule,
                });
            }
        }
        if !writes.is_empty() {
            let r = Arc::make_mut(map.get_mut(&t.relation).expect("looked up above"));
            for (i, ap, v) in writes {
                r.set_value(i, ap, v);
            }
        }
    }
    Ok((DatabaseSnapshot::from_map(map), report))
}

fn most_frequent(candidates: &[Candidate]) -> Value {
    // candidates are in value order, so the first maximum is the smallest
    let best = candidates.iter().map(|c| c.count).max().unwrap_or(0);
    candidates
        .iter()
        .find(|c| c.count == best)
        .map(|c| c.value.clone())
        .unwrap_or(Value::Null)
}

/// Set semantics on every relation; drops the cleaning provenance.
pub fn reduce(db: &DatabaseSnapshot) -> DatabaseSnapshot {
    let map = db
        .relations()
        .map(|r| (r.name().to_string(), Arc::new(r.distinct())))
        .collect();
    DatabaseSnapshot::from_map(map)
}

/// Keys of a cleaned relation to declare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationKeys {
    pub relation: String,
    pub primary: String,
    pub other_surrogates: Vec<String>,
    pub natural_key: Vec<String>,
}

/// Keys of a split-off historized relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetailKeys {
    pub relation: String,
    pub parent: String,
    pub surrogate: String,
    pub historization: String,
}

/// Declares the surrogate primary keys, the other surrogates and natural
/// keys as unique constraints, and links split-off relations to their
/// parent; the result must validate cleanly.
pub fn redeclare_constraints(
    db: DatabaseSnapshot,
    keys: &[RelationKeys],
    details: &[DetailKeys],
) -> Result<DatabaseSnapshot> {
    let mut map = db.into_map();
    for k in keys {
        let r = map
            .get_mut(&k.relation)
            .map(Arc::make_mut)
            .ok_or_else(|| ModelError::UnknownRelation(k.relation.clone()))?;
        let schema = r.schema_mut();
        schema.primary_key = Some(vec![k.primary.clone()]);
        schema.unique = k.other_surrogates.iter().map(|s| vec![s.clone()]).collect();
        if !schema.unique.contains(&k.natural_key) && schema.primary_key.as_ref() != Some(&k.natural_key) {
            schema.unique.push(k.natural_key.clone());
        }
    }
    for d in details {
        let r = map
            .get_mut(&d.relation)
            .map(Arc::make_mut)
            .ok_or_else(|| ModelError::UnknownRelation(d.relation.clone()))?;
        let schema = r.schema_mut();
        schema.unique = vec![vec![d.surrogate.clone(), d.historization.clone()]];
        schema.foreign_keys = vec![ForeignKey::new(&d.surrogate, &d.parent, &d.surrogate)];
    }
    let mut out = DatabaseSnapshot::from_map(map);
    out.check_schemas()?;
    let report = validate_constraints(&out);
    if !report.is_empty() {
        return Err(NormalizeError::ConstraintViolatedPostClean(report));
    }
    out.validation = report;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Attribute, AttributeType};

    fn rel(rows: &[(i64, &str, &str)]) -> Relation {
        let s = RelationSchema::new(
            "t",
            vec![
                Attribute::new("id", AttributeType::Integer, false),
                Attribute::new("k", AttributeType::Text, true),
                Attribute::new("a", AttributeType::Text, true),
            ],
        );
        Relation::from_rows(s, rows.iter().map(|&(i, k, a)| vec![i.into(), k.into(), a.into()]).collect())
            .unwrap()
    }

    fn chase(r: Relation, policy: ConflictPolicy) -> (DatabaseSnapshot, ConflictReport) {
        let db = DatabaseSnapshot::new(vec![r]).unwrap();
        let eq = SimilarityPolicy::exact();
        let t = ChaseTarget {
            relation: "t".into(),
            key: vec!["k".into()],
            attributes: vec!["a".into()],
            eq: &eq,
            decisions: &[],
        };
        chase_clean(&db, &[t], &policy).unwrap()
    }

    #[test]
    fn most_frequent_rule() {
        let (db, rep) = chase(
            rel(&[(1, "x", "b"), (2, "x", "a"), (3, "x", "a")]),
            ConflictPolicy::Rule(ConflictRule::MostFrequent),
        );
        assert_eq!(rep.conflicts.len(), 1);
        assert_eq!(rep.conflicts[0].chosen, Some(Value::text("a")));
        assert!(db.relation("t").unwrap().rows().iter().all(|r| r[2] == Value::text("a")));
    }

    #[test]
    fn most_frequent_tie_goes_to_smallest() {
        let (_, rep) = chase(
            rel(&[(1, "x", "b"), (2, "x", "a")]),
            ConflictPolicy::Rule(ConflictRule::MostFrequent),
        );
        assert_eq!(rep.conflicts[0].chosen, Some(Value::text("a")));
    }

    #[test]
    fn first_by_provenance_rule() {
        let (_, rep) = chase(
            rel(&[(1, "x", "b"), (2, "x", "a"), (3, "x", "a")]),
            ConflictPolicy::Rule(ConflictRule::FirstByProvenance),
        );
        assert_eq!(rep.conflicts[0].chosen, Some(Value::text("b")));
    }

    #[test]
    fn expert_only_leaves_conflict_open() {
        let (db, rep) = chase(rel(&[(1, "x", "b"), (2, "x", "a")]), ConflictPolicy::ExpertOnly);
        assert_eq!(rep.unresolved_count(), 1);
        assert_eq!(db.relation("t").unwrap().rows()[0][2], Value::text("b"));
    }

    #[test]
    fn single_valued_group_is_untouched() {
        let (_, rep) = chase(rel(&[(1, "x", "a"), (2, "x", "a")]), ConflictPolicy::ExpertOnly);
        assert!(rep.conflicts.is_empty());
    }

    #[test]
    fn overrides_on_unknown_attribute_fail() {
        let c = classify_stability(
            &rel(&[(1, "x", "a")]),
            &["k".into()],
            &["id".into()],
            Fraction::zero(),
            &SimilarityPolicy::exact(),
        )
        .unwrap();
        let mut o = BTreeMap::new();
        o.insert("zz".to_string(), StabilityClass::Stable);
        assert!(matches!(
            apply_expert_overrides(c, &o),
            Err(NormalizeError::UnknownOverride { .. })
        ));
    }

    #[test]
    fn all_stable_means_no_unstable() {
        let c = classify_stability(
            &rel(&[(1, "x", "a"), (2, "x", "a"), (3, "y", "b")]),
            &["k".into()],
            &["id".into()],
            Fraction::zero(),
            &SimilarityPolicy::exact(),
        )
        .unwrap();
        assert!(c.unstable().is_empty());
        assert_eq!(c.stable(), vec!["a"]);
    }

    #[test]
    fn reduce_is_idempotent() {
        let db = DatabaseSnapshot::new(vec![rel(&[(1, "x", "a"), (1, "x", "a")])]).unwrap();
        let once = reduce(&db);
        assert_eq!(once.relation("t").unwrap().len(), 1);
        assert_eq!(reduce(&once), once);
    }
}
