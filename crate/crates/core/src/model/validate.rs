use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use super::grouping::{dense_groups, hash_at};
use super::relation::Relation;
use super::snapshot::DatabaseSnapshot;
use super::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Finding {
    /// Two or more rows share a non-null combination of a declared key.
    DuplicateKey {
        relation: String,
        key: Vec<String>,
        value: Vec<Value>,
        rows: Vec<usize>,
    },
    /// A non-null FK value with no matching row in the target.
    DanglingForeignKey {
        relation: String,
        columns: Vec<String>,
        ref_relation: String,
        value: Vec<Value>,
        row: usize,
    },
    /// Some rows carry Null on a natural-key attribute.
    NaturalKeyContainsNull {
        relation: String,
        attributes: Vec<String>,
        rows: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.findings.len()
    }
}

/// Checks uniqueness of every declared key and inclusion of every declared
/// foreign key. Key combinations containing a Null are exempt, as in SQL.
pub fn validate_constraints(db: &DatabaseSnapshot) -> ValidationReport {
    let mut findings = Vec::new();
    for rel in db.relations() {
        for key in rel.schema().declared_keys() {
            findings.extend(duplicate_groups(rel, key));
        }
    }
    for rel in db.relations() {
        for fk in &rel.schema().foreign_keys {
            let Some(target) = db.get(&fk.ref_relation) else { continue };
            let (Ok(local), Ok(remote)) = (rel.positions(&fk.columns), target.positions(&fk.ref_columns)) else {
                continue;
            };
            // Single-column keys (the usual case) are looked up without
            // building a vector per row.
            let single: Option<HashSet<&Value>> =
                (remote.len() == 1).then(|| target.rows().iter().map(|r| &r[remote[0]]).collect());
            let multi: Option<HashSet<Vec<&Value>>> = (remote.len() != 1).then(|| {
                target
                    .rows()
                    .iter()
                    .map(|r| remote.iter().map(|&p| &r[p]).collect())
                    .collect()
            });
            for (i, row) in rel.rows().iter().enumerate() {
                if local.iter().any(|&p| row[p].is_null()) {
                    continue;
                }
                let present = match (&single, &multi) {
                    (Some(u), _) => u.contains(&row[local[0]]),
                    (_, Some(u)) => u.contains(&local.iter().map(|&p| &row[p]).collect::<Vec<_>>()),
                    _ => unreachable!(),
                };
                if !present {
                    findings.push(Finding::DanglingForeignKey {
                        relation: rel.name().to_string(),
                        columns: fk.columns.clone(),
                        ref_relation: fk.ref_relation.clone(),
                        value: local.iter().map(|&p| row[p].clone()).collect(),
                        row: i,
                    });
                }
            }
        }
    }
    ValidationReport { findings }
}

fn duplicate_groups(rel: &Relation, key: &[String]) -> Vec<Finding> {
    let Ok(pos) = rel.positions(key) else { return Vec::new() };
    let rows = rel.rows();
    let (ids, count) = dense_groups(
        rows.len(),
        |i| pos.iter().all(|&p| !rows[i][p].is_null()),
        |i, h| hash_at(&rows[i], &pos, h),
        |i, j| pos.iter().all(|&p| rows[i][p] == rows[j][p]),
    );
    let mut sizes = vec![0usize; count];
    for &g in ids.iter().filter(|&&g| g != usize::MAX) {
        sizes[g] += 1;
    }
    if sizes.iter().all(|&n| n == 1) {
        return Vec::new();
    }
    let mut groups: BTreeMap<usize, (Vec<&Value>, Vec<usize>)> = BTreeMap::new();
    for (i, &g) in ids.iter().enumerate() {
        if g != usize::MAX && sizes[g] > 1 {
            groups
                .entry(g)
                .or_insert_with(|| (pos.iter().map(|&p| &rows[i][p]).collect(), Vec::new()))
                .1
                .push(i);
        }
    }
    let mut out: Vec<Finding> = groups
        .into_values()
        .map(|(v, rows)| Finding::DuplicateKey {
            relation: rel.name().to_string(),
            key: key.to_vec(),
            value: v.into_iter().cloned().collect(),
            rows,
        })
        .collect();
    out.sort_by_key(|f| match f {
        Finding::DuplicateKey { rows, .. } => rows[0],
        _ => 0,
    });
    out
}
