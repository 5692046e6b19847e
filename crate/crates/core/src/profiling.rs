//! Attribute and relation redundancy profiles, the g3 measure and the chart
//! documents built from them. Everything here is a single hash-grouping
//! pass over the relation.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::Serialize;

use crate::fraction::Fraction;
use crate::model::{AttributeTag, Finding, ModelError, Relation, Value};
use crate::model::grouping::dense_groups;
use crate::similarity::{Canonicalizer, SimilarityPolicy};

#[derive(Debug, thiserror::Error)]
pub enum ProfilingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("attribute {0} appears on both sides of the dependency")]
    OverlappingSets(String),
}

/// Distinct / null / duplicate counts of one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub dv: u64,
    pub nv: u64,
    pub ov: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeProfile {
    pub attribute: String,
    #[serde(flatten)]
    pub counts: Counts,
}

impl AttributeProfile {
    pub fn dv(&self) -> u64 {
        self.counts.dv
    }
    pub fn nv(&self) -> u64 {
        self.counts.nv
    }
    pub fn ov(&self) -> u64 {
        self.counts.ov
    }
}

pub fn attribute_profile(r: &Relation, attribute: &str) -> Result<AttributeProfile, ModelError> {
    let p = r.position(attribute)?;
    let mut distinct: HashSet<&Value> = HashSet::new();
    let mut nv = 0u64;
    for row in r.rows() {
        match &row[p] {
            Value::Null => nv += 1,
            v => {
                distinct.insert(v);
            }
        }
    }
    let dv = distinct.len() as u64;
    Ok(AttributeProfile {
        attribute: attribute.to_string(),
        counts: Counts {
            dv,
            nv,
            ov: r.len() as u64 - dv - nv,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationProfile {
    pub relation: String,
    pub size: u64,
    pub profiles: Vec<AttributeProfile>,
    /// Attribute names: keys, then remaining by decreasing dv, then FKs.
    pub display_order: Vec<String>,
    #[serde(skip)]
    pub tags: BTreeMap<String, AttributeTag>,
    pub natural_key: Option<Vec<String>>,
    pub natural_key_distinct: Option<u64>,
}

impl RelationProfile {
    pub fn profile(&self, attribute: &str) -> Option<&AttributeProfile> {
        self.profiles.iter().find(|p| p.attribute == attribute)
    }

    fn category(&self, attribute: &str) -> &'static str {
        let tag = self.tags.get(attribute).copied().unwrap_or(AttributeTag::Remaining);
        let in_nk = self
            .natural_key
            .as_ref()
            .is_some_and(|nk| nk.iter().any(|a| a == attribute));
        if in_nk && !tag.is_key() && !tag.is_foreign() {
            "NK"
        } else {
            tag.category()
        }
    }
}

/// Number of distinct value combinations on `attributes`; Null components
/// compare equal to Null.
pub fn distinct_combinations<S: AsRef<str>>(
    r: &Relation,
    attributes: &[S],
) -> Result<u64, ModelError> {
    let pos = r.positions(attributes)?;
    let set: HashSet<Vec<&Value>> = r
        .rows()
        .iter()
        .map(|row| pos.iter().map(|&p| &row[p]).collect())
        .collect();
    Ok(set.len() as u64)
}

/// Builds the relation redundancy profile. Attributes missing from `tags`
/// are treated as remaining attributes.
pub fn relation_profile(
    r: &Relation,
    tags: &BTreeMap<String, AttributeTag>,
    natural_key: Option<&[String]>,
) -> Result<RelationProfile, ModelError> {
    for a in tags.keys() {
        r.position(a)?;
    }
    let profiles = r
        .schema()
        .attribute_names()
        .map(|a| attribute_profile(r, a))
        .collect::<Result<Vec<_>, _>>()?;
    let tag_of = |a: &str| tags.get(a).copied().unwrap_or(AttributeTag::Remaining);

    let mut keys = Vec::new();
    let mut middle = Vec::new();
    let mut fks = Vec::new();
    for p in &profiles {
        let t = tag_of(&p.attribute);
        if t.is_key() {
            keys.push(p.attribute.clone());
        } else if t.is_foreign() {
            fks.push(p.attribute.clone());
        } else {
            middle.push(p);
        }
    }
    // stable sort keeps schema order among equal dv
    middle.sort_by_key(|p| std::cmp::Reverse(p.dv()));
    let mut display_order = keys;
    display_order.extend(middle.into_iter().map(|p| p.attribute.clone()));
    display_order.extend(fks);

    let natural_key_distinct = natural_key
        .map(|nk| distinct_combinations(r, nk))
        .transpose()?;
    Ok(RelationProfile {
        relation: r.name().to_string(),
        size: r.len() as u64,
        profiles,
        display_order,
        tags: tags.clone(),
        natural_key: natural_key.map(<[String]>::to_vec),
        natural_key_distinct,
    })
}

/// Reports a natural key some of whose rows carry Null components.
pub fn natural_key_nulls(r: &Relation, natural_key: &[String]) -> Result<Option<Finding>, ModelError> {
    let pos = r.positions(natural_key)?;
    let rows = r
        .rows()
        .iter()
        .filter(|row| pos.iter().any(|&p| row[p].is_null()))
        .count();
    Ok((rows > 0).then(|| Finding::NaturalKeyContainsNull {
        relation: r.name().to_string(),
        attributes: natural_key.to_vec(),
        rows,
    }))
}

/// Canonical grouping key of `row` on `positions` under `eq`.
pub(crate) fn group_key(
    row: &[Value],
    positions: &[usize],
    names: &[String],
    eq: &SimilarityPolicy,
) -> Vec<Value> {
    positions
        .iter()
        .zip(names)
        .map(|(&p, n)| eq.canonical(n, &row[p]).into_owned())
        .collect()
}

/// Dense group index of every row under `attrs`, plus the group count.
pub(crate) fn row_groups<S: AsRef<str>>(
    r: &Relation,
    attrs: &[S],
    eq: &SimilarityPolicy,
) -> Result<(Vec<usize>, usize), ModelError> {
    let pos = r.positions(attrs)?;
    let canon: Vec<Canonicalizer> = attrs.iter().map(|a| eq.get(a.as_ref())).collect();
    let rows = r.rows();
    let key = |i: usize, k: usize| canon[k].canonical(&rows[i][pos[k]]);
    Ok(dense_groups(
        rows.len(),
        |_| true,
        |i, h| (0..pos.len()).for_each(|k| key(i, k).hash(h)),
        |i, j| (0..pos.len()).all(|k| key(i, k) == key(j, k)),
    ))
}

/// g3 of `groups -> rhs` for precomputed left-hand groups.
pub(crate) fn g3_grouped(
    r: &Relation,
    groups: &(Vec<usize>, usize),
    rhs: &str,
    eq: &SimilarityPolicy,
) -> Result<Fraction, ModelError> {
    let a = r.position(rhs)?;
    if r.is_empty() {
        return Ok(Fraction::zero());
    }
    let mut freq: HashMap<(usize, Cow<'_, Value>), u64> = HashMap::with_capacity(r.len());
    for (row, &g) in r.rows().iter().zip(&groups.0) {
        *freq.entry((g, eq.canonical(rhs, &row[a]))).or_default() += 1;
    }
    let mut best = vec![0u64; groups.1];
    for ((g, _), n) in freq {
        best[g] = best[g].max(n);
    }
    let kept: u64 = best.iter().sum();
    let n = r.len() as u64;
    Ok(Fraction::new(n - kept, n))
}

/// g3(X -> A): the minimum fraction of rows to delete for X -> A to hold,
/// computed as 1 - (sum over X-groups of the top A-frequency) / |r|.
/// Nulls are ordinary values on both sides. Zero for the empty relation.
pub fn g3<S: AsRef<str>>(
    r: &Relation,
    lhs: &[S],
    rhs: &str,
    eq: &SimilarityPolicy,
) -> Result<Fraction, ProfilingError> {
    if lhs.iter().any(|n| n.as_ref() == rhs) {
        return Err(ProfilingError::OverlappingSets(rhs.to_string()));
    }
    let groups = row_groups(r, lhs, eq)?;
    Ok(g3_grouped(r, &groups, rhs, eq)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartBar {
    pub attribute: String,
    pub category: String,
    pub dv: u64,
    pub nv: u64,
    pub ov: u64,
}

/// Data behind a stacked-bar redundancy chart: one bar per attribute in
/// display order, the relation size (blue line) and the natural-key
/// distinct count (red line).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChartDocument {
    pub relation: String,
    pub size: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub red_line: Option<u64>,
    pub bars: Vec<ChartBar>,
}

impl ChartDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart serializes")
    }
}

pub fn export_profile_chart(rp: &RelationProfile) -> ChartDocument {
    let mut bars: Vec<ChartBar> = rp
        .display_order
        .iter()
        .filter_map(|a| rp.profile(a))
        .map(|p| ChartBar {
            attribute: p.attribute.clone(),
            category: rp.category(&p.attribute).to_string(),
            dv: p.dv(),
            nv: p.nv(),
            ov: p.ov(),
        })
        .collect();
    // a composite natural key gets its own column right after the keys
    if let (Some(nk), Some(distinct)) = (&rp.natural_key, rp.natural_key_distinct) {
        if nk.len() > 1 {
            let at = bars.iter().take_while(|b| b.category == "K" || b.category == "SK").count();
            bars.insert(
                at,
                ChartBar {
                    attribute: nk.join("+"),
                    category: "NK".into(),
                    dv: distinct,
                    nv: 0,
                    ov: rp.size - distinct,
                },
            );
        }
    }
    ChartDocument {
        relation: rp.relation.clone(),
        size: rp.size,
        red_line: rp.natural_key_distinct,
        bars,
    }
}

/// Plain-text rendering of a chart for terminals: one horizontal bar per
/// attribute, `#` for distinct, `.` for null and `+` for duplicate values.
pub fn render_chart_text(doc: &ChartDocument, width: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} (|r| = {})", doc.relation, doc.size);
    if let Some(red) = doc.red_line {
        let _ = writeln!(out, "natural key distinct = {red}");
    }
    let label = doc.bars.iter().map(|b| b.attribute.len()).max().unwrap_or(0);
    let scale = |n: u64| -> usize {
        if doc.size == 0 {
            0
        } else {
            ((n as f64 / doc.size as f64) * width as f64).round() as usize
        }
    };
    for b in &doc.bars {
        let _ = writeln!(
            out,
            "{:>label$} {:>2} |{}{}{}| dv={} nv={} ov={}",
            b.attribute,
            b.category,
            "#".repeat(scale(b.dv)),
            ".".repeat(scale(b.nv)),
            "+".repeat(scale(b.ov)),
            b.dv,
            b.nv,
            b.ov,
        );
    }
    out
}
