//! Artificial-unicity removal: surrogate values of rows that agree on the
//! potential key are collapsed to one representative, relation by relation
//! along the propagation graph, and surrogate foreign keys follow.

use std::borrow::Cow;
use std::sync::Arc;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use petgraph::algo::is_cyclic_directed;
use petgraph::graphmap::DiGraphMap;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::elicitation::{ElicitationError, ElicitationSession};
use crate::fraction::Fraction;
use crate::model::{DatabaseSnapshot, Finding, ModelError, Relation, Value};
use crate::profiling::row_groups;
use crate::similarity::SimilarityPolicy;

#[derive(Debug, thiserror::Error)]
pub enum AuError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Elicitation(#[from] ElicitationError),
    #[error("propagation graph is cyclic even when restricted to potential-key foreign keys: {0:?}")]
    CyclicAfterRestriction(Vec<String>),
    #[error("potential key of {relation} contains surrogate key {attribute}")]
    PotentialKeyOverlapsSK { relation: String, attribute: String },
    #[error("artificial unicity is undefined for the empty relation {0}")]
    EmptyRelation(String),
}

type Result<T, E = AuError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropagationEdge {
    /// Referencing relation.
    pub from: String,
    pub foreign_key: String,
    /// Referenced relation and its surrogate attribute.
    pub to: String,
    pub surrogate: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropagationGraph {
    pub nodes: Vec<String>,
    pub edges: Vec<PropagationEdge>,
    /// Whether edges outside potential keys had to be dropped to break a cycle.
    pub restricted: bool,
}

impl PropagationGraph {
    /// Processing rounds: each round holds the nodes without outgoing
    /// edges once the previous rounds are removed, sorted by name.
    pub fn rounds(&self) -> Vec<Vec<String>> {
        let mut remaining: BTreeSet<&str> = self.nodes.iter().map(String::as_str).collect();
        let mut out = Vec::new();
        while !remaining.is_empty() {
            let round: Vec<String> = remaining
                .iter()
                .filter(|n| {
                    !self
                        .edges
                        .iter()
                        .any(|e| e.from == **n && e.to != e.from && remaining.contains(e.to.as_str()))
                })
                .map(|n| n.to_string())
                .collect();
            assert!(!round.is_empty(), "rounds() on a cyclic graph");
            for n in &round {
                remaining.remove(n.as_str());
            }
            out.push(round);
        }
        out
    }

    pub fn order(&self) -> Vec<String> {
        self.rounds().concat()
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.nodes.iter().any(|n| n == relation)
    }

    fn cyclic_nodes(nodes: &[String], edges: &[PropagationEdge]) -> Option<Vec<String>> {
        let mut g: DiGraphMap<&str, ()> = DiGraphMap::new();
        for n in nodes {
            g.add_node(n);
        }
        for e in edges {
            g.add_edge(&e.from, &e.to, ());
        }
        if !is_cyclic_directed(&g) {
            return None;
        }
        let mut cyclic: Vec<String> = petgraph::algo::tarjan_scc(&g)
            .into_iter()
            .filter(|c| c.len() > 1 || edges.iter().any(|e| e.from == c[0] && e.to == c[0]))
            .flatten()
            .map(str::to_string)
            .collect();
        cyclic.sort();
        Some(cyclic)
    }
}

/// Nodes are relations with a surrogate key and no declared natural key;
/// edges are single-column foreign keys between nodes that target a
/// surrogate. A cyclic graph is restricted to foreign keys inside the
/// referencing relation's potential key.
pub fn build_propagation_graph(session: &ElicitationSession) -> Result<PropagationGraph> {
    let mut nodes = Vec::new();
    for name in session.relation_names() {
        if !session.surrogate_keys(name)?.is_empty() && session.declared_natural_key(name)?.is_none() {
            nodes.push(name.to_string());
        }
    }
    let mut edges = Vec::new();
    for from in &nodes {
        let schema = session.snapshot().relation(from)?.schema();
        for fk in &schema.foreign_keys {
            let Some((col, target)) = fk.unary() else { continue };
            if !nodes.contains(&fk.ref_relation) {
                continue;
            }
            if session.surrogate_keys(&fk.ref_relation)?.iter().any(|s| s == target) {
                edges.push(PropagationEdge {
                    from: from.clone(),
                    foreign_key: col.to_string(),
                    to: fk.ref_relation.clone(),
                    surrogate: target.to_string(),
                });
            }
        }
    }
    if PropagationGraph::cyclic_nodes(&nodes, &edges).is_none() {
        return Ok(PropagationGraph {
            nodes,
            edges,
            restricted: false,
        });
    }
    let mut kept = Vec::new();
    for e in edges {
        if session.potential_key(&e.from)?.contains(&e.foreign_key) {
            kept.push(e);
        }
    }
    if let Some(cycle) = PropagationGraph::cyclic_nodes(&nodes, &kept) {
        return Err(AuError::CyclicAfterRestriction(cycle));
    }
    Ok(PropagationGraph {
        nodes,
        edges: kept,
        restricted: true,
    })
}

/// Partition of a relation's rows: rows agreeing on the potential key, or
/// sharing a surrogate value, are in the same class.
#[derive(Debug, Clone)]
pub struct RowPartition {
    class_of_row: Vec<usize>,
    classes: usize,
}

impl RowPartition {
    pub fn class_of(&self, row: usize) -> usize {
        self.class_of_row[row]
    }

    pub fn len(&self) -> usize {
        self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.classes == 0
    }
}

pub fn row_partition<S: AsRef<str>>(
    r: &Relation,
    surrogates: &[S],
    x: &[String],
    eq: &SimilarityPolicy,
) -> Result<RowPartition> {
    if let Some(sk) = surrogates.iter().find(|s| x.iter().any(|a| a == s.as_ref())) {
        return Err(AuError::PotentialKeyOverlapsSK {
            relation: r.name().to_string(),
            attribute: sk.as_ref().to_string(),
        });
    }
    let skpos = r.positions(surrogates)?;
    let mut uf = UnionFind::<usize>::new(r.len());
    let (groups, count) = row_groups(r, x, eq)?;
    let mut first = vec![usize::MAX; count];
    for (i, g) in groups.into_iter().enumerate() {
        if first[g] == usize::MAX {
            first[g] = i;
        } else {
            uf.union(first[g], i);
        }
    }
    for &p in &skpos {
        let mut by_value: HashMap<&Value, usize> = HashMap::with_capacity(r.len());
        for (i, row) in r.rows().iter().enumerate() {
            if row[p].is_null() {
                continue;
            }
            let first = *by_value.entry(&row[p]).or_insert(i);
            uf.union(first, i);
        }
    }
    let mut dense = vec![usize::MAX; r.len()];
    let mut classes = 0;
    let class_of_row = (0..r.len())
        .map(|i| {
            let root = uf.find(i);
            if dense[root] == usize::MAX {
                dense[root] = classes;
                classes += 1;
            }
            dense[root]
        })
        .collect();
    Ok(RowPartition { class_of_row, classes })
}

/// Classes of one surrogate attribute's values and their representatives
/// (the class minimum under [`Value::representative_cmp`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivalenceMapping {
    pub relation: String,
    pub attribute: String,
    pub classes: Vec<Vec<Value>>,
    #[serde(skip)]
    representative: HashMap<Value, Value>,
}

impl EquivalenceMapping {
    /// Projects a row partition onto the values of `attribute`.
    pub fn from_partition(r: &Relation, attribute: &str, partition: &RowPartition) -> Result<Self> {
        let p = r.position(attribute)?;
        let mut pairs: Vec<(usize, &Value)> = r
            .rows()
            .iter()
            .enumerate()
            .filter(|(_, row)| !row[p].is_null())
            .map(|(i, row)| (partition.class_of(i), &row[p]))
            .collect();
        pairs.sort_unstable_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.representative_cmp(b.1)));
        pairs.dedup();
        let mut classes: Vec<Vec<Value>> = pairs
            .chunk_by(|a, b| a.0 == b.0)
            .map(|c| c.iter().map(|(_, v)| (*v).clone()).collect())
            .collect();
        classes.sort_by(|a, b| a[0].representative_cmp(&b[0]));
        let representative = classes
            .iter()
            .flat_map(|c| c.iter().map(move |v| (v.clone(), c[0].clone())))
            .collect();
        Ok(Self {
            relation: r.name().to_string(),
            attribute: attribute.to_string(),
            classes,
            representative,
        })
    }

    /// Representative of `v`, or `None` when `v` is not a value of the
    /// attribute. Null maps to Null.
    pub fn map(&self, v: &Value) -> Option<Value> {
        if v.is_null() {
            return Some(Value::Null);
        }
        self.representative.get(v).cloned()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn is_identity(&self) -> bool {
        self.classes.iter().all(|c| c.len() == 1)
    }
}

/// Classes of `sk` values with respect to `x`.
pub fn equivalence_classes(
    r: &Relation,
    sk: &str,
    x: &[String],
    eq: &SimilarityPolicy,
) -> Result<EquivalenceMapping> {
    let partition = row_partition(r, &[sk], x, eq)?;
    EquivalenceMapping::from_partition(r, sk, &partition)
}

/// Replaces every surrogate value by its representative. Each mapping
/// names the attribute it rewrites.
pub fn clean_sk(r: &Relation, mappings: &[EquivalenceMapping]) -> Result<Relation> {
    let mut out = r.clone();
    rewrite_sk(&mut out, mappings)?;
    Ok(out)
}

fn rewrite_sk(r: &mut Relation, mappings: &[EquivalenceMapping]) -> Result<()> {
    for m in mappings {
        r.rewrite_column(&m.attribute, |_, v| m.map(v).unwrap_or_else(|| v.clone()))?;
    }
    Ok(())
}

/// Replaces every value of foreign key `fk` by the representative of the
/// referenced surrogate value. Values unknown to the mapping are left
/// as they are and reported.
pub fn clean_fk(s: &Relation, fk: &str, m: &EquivalenceMapping) -> Result<(Relation, Vec<Finding>)> {
    let mut out = s.clone();
    let mut dangling = Vec::new();
    rewrite_fk(&mut out, fk, m, &mut dangling)?;
    Ok((out, dangling))
}

fn rewrite_fk(s: &mut Relation, fk: &str, m: &EquivalenceMapping, dangling: &mut Vec<Finding>) -> Result<()> {
    let name = s.name().to_string();
    s.rewrite_column(fk, |i, v| match m.map(v) {
        Some(rep) => rep,
        None => {
            dangling.push(Finding::DanglingForeignKey {
                relation: name.clone(),
                columns: vec![fk.to_string()],
                ref_relation: m.relation.clone(),
                value: vec![v.clone()],
                row: i,
            });
            v.clone()
        }
    })?;
    Ok(())
}

/// 1 - classes / |r|.
pub fn au_level(r: &Relation, m: &EquivalenceMapping) -> Result<Fraction> {
    if r.is_empty() {
        return Err(AuError::EmptyRelation(r.name().to_string()));
    }
    let n = r.len() as u64;
    Ok(Fraction::new(n - m.class_count() as u64, n))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationAu {
    pub relation: String,
    pub round: usize,
    pub surrogate_keys: Vec<String>,
    pub potential_key: Vec<String>,
    pub classes: u64,
    pub size: u64,
    /// Absent for the empty relation.
    pub au: Option<Fraction>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuReport {
    pub order: Vec<String>,
    pub restricted: bool,
    pub relations: Vec<RelationAu>,
    pub dangling: Vec<Finding>,
    #[serde(skip)]
    pub mappings: BTreeMap<String, Vec<EquivalenceMapping>>,
}

impl AuReport {
    pub fn relation(&self, name: &str) -> Option<&RelationAu> {
        self.relations.iter().find(|r| r.relation == name)
    }

    pub fn mapping(&self, relation: &str, attribute: &str) -> Option<&EquivalenceMapping> {
        self.mappings
            .get(relation)?
            .iter()
            .find(|m| m.attribute == attribute)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs the cleaning over the session's snapshot: nodes are processed in
/// graph rounds, and after each node every single-column foreign key that
/// targets one of its surrogates (in any relation) is rewritten.
pub fn removing_au(session: &ElicitationSession) -> Result<(DatabaseSnapshot, AuReport)> {
    let graph = build_propagation_graph(session)?;
    let mut relations = (**session.snapshot()).clone().into_map();
    let mut report = AuReport {
        order: graph.order(),
        restricted: graph.restricted,
        ..AuReport::default()
    };
    for (round, names) in graph.rounds().into_iter().enumerate() {
        for name in names {
            let sks = session.surrogate_keys(&name)?;
            let x = session.potential_key(&name)?;
            let eq = &session.state(&name)?.similarity;
            let r = &relations[&name];
            let partition = row_partition(r, &sks, &x, eq)?;
            let mappings = sks
                .iter()
                .map(|sk| EquivalenceMapping::from_partition(r, sk, &partition))
                .collect::<Result<Vec<_>>>()?;
            report.relations.push(RelationAu {
                relation: name.clone(),
                round,
                surrogate_keys: sks.clone(),
                potential_key: x,
                classes: partition.len() as u64,
                size: r.len() as u64,
                au: (!r.is_empty()).then(|| Fraction::new((r.len() - partition.len()) as u64, r.len() as u64)),
            });
            rewrite_sk(Arc::make_mut(relations.get_mut(&name).expect("node exists")), &mappings)?;
            propagate(&mut relations, &name, &mappings, &mut report.dangling)?;
            report.mappings.insert(name, mappings);
        }
    }
    Ok((DatabaseSnapshot::from_map(relations), report))
}

fn propagate(
    relations: &mut BTreeMap<String, Arc<Relation>>,
    target: &str,
    mappings: &[EquivalenceMapping],
    dangling: &mut Vec<Finding>,
) -> Result<()> {
    let names: Vec<String> = relations.keys().cloned().collect();
    for s in names {
        let fks: Vec<(String, String)> = relations[&s]
            .schema()
            .foreign_keys
            .iter()
            .filter(|fk| fk.ref_relation == target)
            .filter_map(|fk| fk.unary().map(|(c, t)| (c.to_string(), t.to_string())))
            .collect();
        for (col, sk) in fks {
            let Some(m) = mappings.iter().find(|m| m.attribute == sk) else { continue };
            rewrite_fk(Arc::make_mut(relations.get_mut(&s).expect("listed above")), &col, m, dangling)?;
        }
    }
    Ok(())
}

/// A class of rows equivalent under the recursive definition that still
/// carries more than one surrogate value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuFinding {
    pub relation: String,
    pub attribute: String,
    pub values: Vec<Value>,
}

/// Recomputes the classes of every node of `db`, comparing surrogate
/// foreign keys inside potential keys through the referenced relation's
/// own classes, and reports classes with two or more surrogate values.
pub fn verify_no_au(db: &DatabaseSnapshot, session: &ElicitationSession) -> Result<Vec<AuFinding>> {
    let graph = build_propagation_graph(session)?;
    let mut mapped: BTreeMap<String, Vec<EquivalenceMapping>> = BTreeMap::new();
    let mut findings = Vec::new();
    for name in graph.order() {
        let sks = session.surrogate_keys(&name)?;
        let x = session.potential_key(&name)?;
        let eq = &session.state(&name)?.similarity;
        let mut r = Cow::Borrowed(db.relation(&name)?);
        for fk in r.schema().foreign_keys.clone() {
            let Some((col, target)) = fk.unary() else { continue };
            if !x.iter().any(|a| a == col) {
                continue;
            }
            if let Some(m) = mapped
                .get(&fk.ref_relation)
                .and_then(|ms| ms.iter().find(|m| m.attribute == target))
            {
                r = Cow::Owned(clean_fk(&r, col, m)?.0);
            }
        }
        let partition = row_partition(&r, &sks, &x, eq)?;
        let mut mappings = Vec::new();
        for sk in &sks {
            let m = EquivalenceMapping::from_partition(&r, sk, &partition)?;
            findings.extend(m.classes.iter().filter(|c| c.len() > 1).map(|c| AuFinding {
                relation: name.clone(),
                attribute: sk.clone(),
                values: c.clone(),
            }));
            mappings.push(m);
        }
        mapped.insert(name, mappings);
    }
    Ok(findings)
}
