//! Benchmark generation: injects artificial unicity into a clean snapshot
//! under a fresh surrogate key, records the intended classes, and checks
//! that a cleaned snapshot gives the original back.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decision::{Decision, DecisionLog};
use crate::fraction::Fraction;
use crate::model::{Attribute, AttributeType, DatabaseSnapshot, ForeignKey, ModelError, Relation, RelationSchema, Value};

#[derive(Debug, thiserror::Error)]
pub enum DeteriorateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} has no declared primary key")]
    NoPrimaryKey(String),
    #[error("deterioration factor {0} is outside [0, 1]")]
    FactorOutOfRange(Fraction),
    #[error("{relation} already has an attribute named {attribute}")]
    NameClash { relation: String, attribute: String },
    #[error("foreign key {relation}{columns:?} spans several columns")]
    CompositeForeignKey { relation: String, columns: Vec<String> },
    #[error("{relation}.{column} value {value} has no referenced row")]
    DanglingSeedReference {
        relation: String,
        column: String,
        value: Value,
    },
    #[error("schema mismatch on {relation}: {message}")]
    SchemaMismatch { relation: String, message: String },
}

type Result<T, E = DeteriorateError> = std::result::Result<T, E>;

pub const DEFAULT_SURROGATE: &str = "new_id";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeteriorationPlan {
    pub default_factor: Fraction,
    pub factors: BTreeMap<String, Fraction>,
    /// 1 disables attribute deterioration.
    pub attribute_multiplier: u32,
    pub seed: u64,
    pub surrogate: String,
}

impl DeteriorationPlan {
    pub fn uniform(df: Fraction, seed: u64) -> Self {
        Self {
            default_factor: df,
            factors: BTreeMap::new(),
            attribute_multiplier: 1,
            seed,
            surrogate: DEFAULT_SURROGATE.to_string(),
        }
    }

    pub fn with_attribute_multiplier(mut self, m: u32) -> Self {
        self.attribute_multiplier = m;
        self
    }

    pub fn factor(&self, relation: &str) -> Fraction {
        self.factors.get(relation).copied().unwrap_or(self.default_factor)
    }
}

/// Number of injected duplicates: |r|·df rounded to the nearest integer,
/// halves rounded down.
pub fn injected_count(size: u64, df: Fraction) -> u64 {
    let scaled = size as u128 * df.numer() as u128;
    let q = df.denom() as u128;
    let (floor, rem) = (scaled / q, scaled % q);
    (floor + u128::from(2 * rem > q)) as u64
}

pub fn deteriorated_size(size: u64, df: Fraction) -> u64 {
    size + injected_count(size, df)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTruth {
    /// The former primary key, now undeclared.
    pub natural_key: Vec<String>,
    /// Surrogate values standing for the same original row.
    pub classes: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub surrogate: String,
    pub relations: BTreeMap<String, RelationTruth>,
}

impl GroundTruth {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }

    /// The decisions a perfect expert would take: the new surrogate is a
    /// surrogate key and the former primary key is the natural key.
    pub fn scripted_decisions(&self) -> DecisionLog {
        let mut log = DecisionLog::new();
        for name in self.relations.keys() {
            log.append(
                name.clone(),
                Decision::TagSurrogate {
                    attribute: self.surrogate.clone(),
                    force: false,
                },
            );
        }
        for (name, t) in &self.relations {
            log.append(
                name.clone(),
                Decision::DeclareNaturalKey {
                    attributes: t.natural_key.clone(),
                },
            );
        }
        log
    }
}

fn stream_of(name: &str, salt: u64) -> u64 {
    // FNV-1a, stable across platforms and releases
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes().chain(salt.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn rng_for(seed: u64, name: &str, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_of(name, salt));
    rng
}

/// Duplicates rows of every relation under a new dense surrogate primary
/// key and spreads foreign-key references over the duplicates.
pub fn tuple_deteriorate(db: &DatabaseSnapshot, plan: &DeteriorationPlan) -> Result<(DatabaseSnapshot, GroundTruth)> {
    let sk = plan.surrogate.as_str();
    let mut out: BTreeMap<String, Relation> = BTreeMap::new();
    let mut truth = GroundTruth {
        surrogate: sk.to_string(),
        relations: BTreeMap::new(),
    };
    // referenced column values -> surrogate values carrying them
    let mut members: HashMap<(String, String), HashMap<Value, Vec<i64>>> = HashMap::new();

    for r in db.relations() {
        let name = r.name().to_string();
        let pk = r
            .schema()
            .primary_key
            .clone()
            .ok_or_else(|| DeteriorateError::NoPrimaryKey(name.clone()))?;
        if r.schema().attribute(sk).is_some() {
            return Err(DeteriorateError::NameClash {
                relation: name,
                attribute: sk.to_string(),
            });
        }
        let df = plan.factor(&name);
        if df > Fraction::one() {
            return Err(DeteriorateError::FactorOutOfRange(df));
        }
        let mut rng = rng_for(plan.seed, &name, 0);
        let n = r.len();
        let extra = injected_count(n as u64, df) as usize;
        let mut rel = r.clone();
        let sources: Vec<usize> = if n == 0 {
            Vec::new()
        } else {
            (0..extra).map(|_| rng.gen_range(0..n)).collect()
        };
        rel.duplicate_rows(&sources);
        let mut ids: Vec<i64> = (1..=rel.len() as i64).collect();
        ids.shuffle(&mut rng);
        rel.insert_column(0, Attribute::new(sk, AttributeType::Integer, false), |i, _| Value::Integer(ids[i]));

        let origin = |i: usize| if i < n { i } else { sources[i - n] };
        let mut classes: Vec<Vec<i64>> = vec![Vec::new(); n];
        for (i, id) in ids.iter().enumerate() {
            classes[origin(i)].push(*id);
        }
        for c in &mut classes {
            c.sort_unstable();
        }
        classes.sort_unstable();

        let referenced: Vec<String> = db
            .relations()
            .flat_map(|s| s.schema().foreign_keys.iter())
            .filter(|fk| fk.ref_relation == name)
            .flat_map(|fk| fk.ref_columns.iter().cloned())
            .collect();
        for col in referenced {
            let p = rel.position(&col)?;
            let mut by_value: HashMap<Value, Vec<i64>> = HashMap::new();
            for (row, id) in rel.rows().iter().zip(&ids) {
                by_value.entry(row[p].clone()).or_default().push(*id);
            }
            members.insert((name.clone(), col), by_value);
        }

        let schema = rel.schema_mut();
        schema.primary_key = Some(vec![sk.to_string()]);
        schema.unique.clear();
        truth.relations.insert(
            name.clone(),
            RelationTruth {
                natural_key: pk,
                classes,
            },
        );
        out.insert(name, rel);
    }

    for (name, rel) in out.iter_mut() {
        let fks = rel.schema().foreign_keys.clone();
        let mut rng = rng_for(plan.seed, name, 1);
        let mut rewired = Vec::new();
        for fk in fks {
            let Some((col, target)) = fk.unary() else {
                return Err(DeteriorateError::CompositeForeignKey {
                    relation: name.clone(),
                    columns: fk.columns.clone(),
                });
            };
            let pool = &members[&(fk.ref_relation.clone(), target.to_string())];
            let p = rel.position(col)?;
            let mut values = Vec::with_capacity(rel.len());
            for row in rel.rows() {
                let v = &row[p];
                if v.is_null() {
                    values.push(Value::Null);
                    continue;
                }
                let ids = pool.get(v).ok_or_else(|| DeteriorateError::DanglingSeedReference {
                    relation: name.clone(),
                    column: col.to_string(),
                    value: v.clone(),
                })?;
                values.push(Value::Integer(ids[rng.gen_range(0..ids.len())]));
            }
            for (i, v) in values.into_iter().enumerate() {
                rel.set_value(i, p, v);
            }
            rewired.push((col.to_string(), fk.ref_relation.clone()));
        }
        let schema = rel.schema_mut();
        for (col, target) in rewired {
            let p = schema.position(&col).expect("fk column");
            schema.attributes[p].ty = AttributeType::Integer;
            for fk in schema.foreign_keys.iter_mut().filter(|fk| fk.columns == [col.clone()]) {
                fk.ref_columns = vec![sk.to_string()];
                debug_assert_eq!(fk.ref_relation, target);
            }
        }
    }
    let out = DatabaseSnapshot::new(out.into_values().map(Relation::without_provenance).collect())?;
    Ok((out, truth))
}

pub const DUP_SEPARATOR: &str = "__dup";

/// Adds `m - 1` copies of every attribute that is neither part of the
/// former primary key, the surrogate, nor a foreign key.
pub fn attribute_deteriorate(db: &DatabaseSnapshot, m: u32, truth: &GroundTruth) -> DatabaseSnapshot {
    if m <= 1 {
        return db.clone();
    }
    let mut map = db.clone().into_map();
    for (name, rel) in map.iter_mut() {
        let nk = truth
            .relations
            .get(name)
            .map(|t| t.natural_key.clone())
            .unwrap_or_default();
        let targets: Vec<String> = rel
            .schema()
            .attribute_names()
            .filter(|a| *a != truth.surrogate && !nk.iter().any(|k| k == a) && !rel.schema().is_foreign_key_column(a))
            .map(str::to_string)
            .collect();
        let rel = Arc::make_mut(rel);
        for a in targets {
            let src = rel.position(&a).expect("attribute exists");
            let base = rel.schema().attributes[src].clone();
            for k in 1..m {
                let mut copy = base.clone();
                copy.name = format!("{a}{DUP_SEPARATOR}{k}");
                let at = src + k as usize;
                rel.insert_column(at, copy, |_, row| row[src].clone());
            }
        }
    }
    DatabaseSnapshot::from_map(map)
}

/// Tuple deterioration followed by attribute deterioration per `plan`.
pub fn deteriorate(db: &DatabaseSnapshot, plan: &DeteriorationPlan) -> Result<(DatabaseSnapshot, GroundTruth)> {
    let (out, truth) = tuple_deteriorate(db, plan)?;
    Ok((attribute_deteriorate(&out, plan.attribute_multiplier, &truth), truth))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RelationRecovery {
    pub relation: String,
    pub original_size: u64,
    pub recovered_size: u64,
    pub size_match: bool,
    pub values_match: bool,
    pub foreign_keys_match: bool,
    pub duplicate_columns_match: bool,
}

impl RelationRecovery {
    pub fn is_green(&self) -> bool {
        self.size_match && self.values_match && self.foreign_keys_match && self.duplicate_columns_match
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecoveryReport {
    pub relations: Vec<RelationRecovery>,
}

impl RecoveryReport {
    pub fn is_green(&self) -> bool {
        self.relations.iter().all(RelationRecovery::is_green)
    }
}

/// Compares a cleaned snapshot with the seed it was generated from.
/// Surrogate columns and `__dup` copies may be extra; foreign keys that
/// point to a surrogate are translated back to the referenced original
/// column before comparing.
pub fn verify_recovery(original: &DatabaseSnapshot, recovered: &DatabaseSnapshot) -> Result<RecoveryReport> {
    let mismatch = |relation: &str, message: String| DeteriorateError::SchemaMismatch {
        relation: relation.to_string(),
        message,
    };
    let mut report = RecoveryReport::default();
    for orig in original.relations() {
        let name = orig.name();
        let rec = recovered
            .get(name)
            .ok_or_else(|| mismatch(name, "missing from the recovered snapshot".into()))?;
        let mut dup_columns = Vec::new();
        for a in rec.schema().attribute_names() {
            if orig.schema().attribute(a).is_some() {
                continue;
            }
            let is_pk = rec.schema().primary_key.as_deref() == Some(&[a.to_string()][..]);
            let dup_of = a
                .rsplit_once(DUP_SEPARATOR)
                .filter(|(base, k)| orig.schema().attribute(base).is_some() && k.parse::<u32>().is_ok())
                .map(|(base, _)| base.to_string());
            match dup_of {
                Some(base) => dup_columns.push((a.to_string(), base)),
                None if is_pk => {}
                None => return Err(mismatch(name, format!("unexpected attribute {a}"))),
            }
        }
        let mut translations: Vec<Option<HashMap<Value, Value>>> = Vec::new();
        for attr in &orig.schema().attributes {
            let Some(ra) = rec.schema().attribute(&attr.name) else {
                return Err(mismatch(name, format!("attribute {} missing", attr.name)));
            };
            let orig_fk = orig.schema().foreign_keys_on(&attr.name).next();
            let rec_fk = rec.schema().foreign_keys_on(&attr.name).next();
            match (orig_fk, rec_fk) {
                (Some(of), Some(rf)) if of.ref_columns != rf.ref_columns => {
                    translations.push(Some(translation(recovered, rf, &of.ref_columns[0])?));
                }
                _ => {
                    if ra.ty != attr.ty {
                        return Err(mismatch(name, format!("attribute {} changed type", attr.name)));
                    }
                    translations.push(None);
                }
            }
        }
        let pos = rec.positions(&orig.schema().attribute_names().collect::<Vec<_>>())?;
        let mut rec_rows: Vec<Vec<Value>> = rec
            .rows()
            .iter()
            .map(|row| {
                pos.iter()
                    .zip(&translations)
                    .map(|(&p, t)| match t {
                        Some(map) => map.get(&row[p]).cloned().unwrap_or_else(|| row[p].clone()),
                        None => row[p].clone(),
                    })
                    .collect()
            })
            .collect();
        rec_rows.sort();
        let orig_rows = orig.sorted_rows();
        let fk_pos: Vec<usize> = translations
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(i, _)| i)
            .collect();
        let project = |rows: &[Vec<Value>]| {
            let mut p: Vec<Vec<Value>> = rows.iter().map(|r| fk_pos.iter().map(|&i| r[i].clone()).collect()).collect();
            p.sort();
            p
        };
        let mut dups_ok = true;
        for (dup, base) in &dup_columns {
            let (d, b) = (rec.position(dup)?, rec.position(base)?);
            dups_ok &= rec.rows().iter().all(|row| row[d] == row[b]);
        }
        report.relations.push(RelationRecovery {
            relation: name.to_string(),
            original_size: orig.len() as u64,
            recovered_size: rec.len() as u64,
            size_match: orig.len() == rec.len(),
            values_match: rec_rows == orig_rows,
            foreign_keys_match: project(&rec_rows) == project(&orig_rows),
            duplicate_columns_match: dups_ok,
        });
    }
    Ok(report)
}

/// Map from the values of the recovered referenced column to the values
/// of `original_column` in the same rows.
fn translation(recovered: &DatabaseSnapshot, fk: &ForeignKey, original_column: &str) -> Result<HashMap<Value, Value>> {
    let target = recovered.relation(&fk.ref_relation)?;
    let from = target.position(&fk.ref_columns[0])?;
    let to = target.position(original_column)?;
    Ok(target.rows().iter().map(|r| (r[from].clone(), r[to].clone())).collect())
}

const TITLE_TYPES: &[&str] = &["movie", "short", "tvSeries", "tvEpisode", "video", "tvMovie"];
const GENRES: &[&str] = &["Drama", "Comedy", "Documentary", "Action", "Romance", "Thriller", "Animation"];
const WORDS: &[&str] = &[
    "night", "river", "stone", "silver", "last", "city", "garden", "winter", "blue", "house", "road", "fire",
];
const FIRST: &[&str] = &["Ada", "Omar", "Lena", "Jun", "Rosa", "Tomas", "Ines", "Kofi", "Mira", "Paul"];
const LAST: &[&str] = &["Silva", "Okafor", "Berg", "Tanaka", "Moreau", "Novak", "Reyes", "Haddad"];
const PROFESSIONS: &[&str] = &["actor", "actress", "director", "writer", "producer", "composer"];
const CATEGORIES: &[&str] = &["actor", "actress", "director", "writer", "self", "producer"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn phrase(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| pick(rng, WORDS)).collect::<Vec<_>>().join(" ")
}

fn maybe<T, F>(rng: &mut ChaCha8Rng, p_null: f64, f: F) -> Value
where
    T: Into<Value>,
    F: FnOnce(&mut ChaCha8Rng) -> T,
{
    if rng.gen_bool(p_null) {
        Value::Null
    } else {
        f(rng).into()
    }
}

fn attr(name: &str, ty: AttributeType, nullable: bool) -> Attribute {
    Attribute::new(name, ty, nullable)
}

/// Five relations shaped like the public IMDB dump (titles, people,
/// episodes, ratings, principals), about `total_rows` rows in all with
/// the dump's relative sizes. Keys are unique and every reference
/// resolves, so the snapshot is free of artificial unicity.
pub fn imdb_seed(total_rows: usize, seed: u64) -> DatabaseSnapshot {
    use AttributeType::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let share = |per_mille: usize| (total_rows * per_mille / 1000).max(1);
    let (n_title, n_name, n_episode, n_rating, n_principal) =
        (share(91), share(114), share(69), share(12), share(714));
    let n_episode = n_episode.min(n_title);
    let n_rating = n_rating.min(n_title);
    let tconst = |i: usize| format!("tt{:07}", i + 1);
    let nconst = |i: usize| format!("nm{:07}", i + 1);

    let title_schema = RelationSchema::new(
        "title",
        vec![
            attr("tconst", Text, false),
            attr("titleType", Text, true),
            attr("primaryTitle", Text, true),
            attr("originalTitle", Text, true),
            attr("isAdult", Boolean, true),
            attr("startYear", Integer, true),
            attr("endYear", Integer, true),
            attr("runtimeMinutes", Integer, true),
            attr("genres", Text, true),
        ],
    )
    .with_primary_key(&["tconst"]);
    let mut titles = Vec::with_capacity(n_title);
    for i in 0..n_title {
        let primary = phrase(&mut rng, 2);
        let original = if rng.gen_bool(0.8) { primary.clone() } else { phrase(&mut rng, 3) };
        let start = rng.gen_range(1900..2024i64);
        titles.push(vec![
            Value::text(tconst(i)),
            Value::text(pick(&mut rng, TITLE_TYPES)),
            Value::text(primary),
            Value::text(original),
            Value::Boolean(rng.gen_bool(0.02)),
            maybe(&mut rng, 0.1, |_| start),
            maybe(&mut rng, 0.9, |rng| start + rng.gen_range(0..10i64)),
            maybe(&mut rng, 0.3, |rng| rng.gen_range(5..200i64)),
            maybe(&mut rng, 0.05, |rng| format!("{},{}", pick(rng, GENRES), pick(rng, GENRES))),
        ]);
    }

    let name_schema = RelationSchema::new(
        "name_basics",
        vec![
            attr("nconst", Text, false),
            attr("primaryName", Text, true),
            attr("birthYear", Integer, true),
            attr("deathYear", Integer, true),
            attr("primaryProfession", Text, true),
            attr("knownForTitles", Text, true),
        ],
    )
    .with_primary_key(&["nconst"]);
    let mut names = Vec::with_capacity(n_name);
    for i in 0..n_name {
        let born = rng.gen_range(1880..2010i64);
        names.push(vec![
            Value::text(nconst(i)),
            Value::text(format!("{} {}", pick(&mut rng, FIRST), pick(&mut rng, LAST))),
            maybe(&mut rng, 0.6, |_| born),
            maybe(&mut rng, 0.9, |rng| born + rng.gen_range(20..100i64)),
            maybe(&mut rng, 0.1, |rng| pick(rng, PROFESSIONS)),
            maybe(&mut rng, 0.2, |rng| tconst(rng.gen_range(0..n_title))),
        ]);
    }

    let episode_schema = RelationSchema::new(
        "title_episode",
        vec![
            attr("tconst", Text, false),
            attr("parentTconst", Text, false),
            attr("seasonNumber", Integer, true),
            attr("episodeNumber", Integer, true),
        ],
    )
    .with_primary_key(&["tconst"])
    .with_foreign_key(ForeignKey::new("tconst", "title", "tconst"))
    .with_foreign_key(ForeignKey::new("parentTconst", "title", "tconst"));
    let mut episode_titles = index::sample(&mut rng, n_title, n_episode).into_vec();
    episode_titles.sort_unstable();
    let episodes = episode_titles
        .into_iter()
        .map(|t| {
            vec![
                Value::text(tconst(t)),
                Value::text(tconst(rng.gen_range(0..n_title))),
                maybe(&mut rng, 0.2, |rng| rng.gen_range(1..20i64)),
                maybe(&mut rng, 0.2, |rng| rng.gen_range(1..30i64)),
            ]
        })
        .collect();

    let rating_schema = RelationSchema::new(
        "title_ratings",
        vec![
            attr("tconst", Text, false),
            attr("averageRating", AttributeType::Decimal, true),
            attr("numVotes", Integer, true),
        ],
    )
    .with_primary_key(&["tconst"])
    .with_foreign_key(ForeignKey::new("tconst", "title", "tconst"));
    let mut rated = index::sample(&mut rng, n_title, n_rating).into_vec();
    rated.sort_unstable();
    let ratings = rated
        .into_iter()
        .map(|t| {
            vec![
                Value::text(tconst(t)),
                Value::Decimal(rust_decimal::Decimal::new(rng.gen_range(10..=100), 1)),
                Value::Integer(rng.gen_range(5..100_000)),
            ]
        })
        .collect();

    let principal_schema = RelationSchema::new(
        "title_principals",
        vec![
            attr("tconst", Text, false),
            attr("ordering", Integer, false),
            attr("nconst", Text, false),
            attr("category", Text, true),
            attr("job", Text, true),
            attr("characters", Text, true),
        ],
    )
    .with_primary_key(&["tconst", "ordering", "nconst"])
    .with_foreign_key(ForeignKey::new("tconst", "title", "tconst"))
    .with_foreign_key(ForeignKey::new("nconst", "name_basics", "nconst"));
    let mut next_ordering: HashMap<usize, i64> = HashMap::new();
    let principals = (0..n_principal)
        .map(|_| {
            let t = rng.gen_range(0..n_title);
            let ordering = next_ordering.entry(t).or_insert(0);
            *ordering += 1;
            vec![
                Value::text(tconst(t)),
                Value::Integer(*ordering),
                Value::text(nconst(rng.gen_range(0..n_name))),
                Value::text(pick(&mut rng, CATEGORIES)),
                maybe(&mut rng, 0.8, |rng| pick(rng, PROFESSIONS)),
                maybe(&mut rng, 0.5, |rng| format!("[\"{}\"]", pick(rng, FIRST))),
            ]
        })
        .collect();

    let build = |s: RelationSchema, rows: Vec<Vec<Value>>| Relation::from_rows(s, rows).expect("generated rows fit");
    DatabaseSnapshot::new(vec![
        build(title_schema, titles),
        build(name_schema, names),
        build(episode_schema, episodes),
        build(rating_schema, ratings),
        build(principal_schema, principals),
    ])
    .expect("generated schema is consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_nearest_with_halves_down() {
        assert_eq!(injected_count(10, Fraction::new(1, 4)), 2);
        assert_eq!(injected_count(10, Fraction::new(27, 100)), 3);
        assert_eq!(injected_count(10, Fraction::new(26, 100)), 3);
        assert_eq!(injected_count(10, Fraction::new(24, 100)), 2);
        assert_eq!(injected_count(0, Fraction::one()), 0);
        assert_eq!(injected_count(7, Fraction::zero()), 0);
    }

    #[test]
    fn seed_is_deterministic_and_clean() {
        let a = imdb_seed(2_000, 3);
        assert_eq!(a, imdb_seed(2_000, 3));
        assert!(crate::model::validate_constraints(&a).is_empty());
        assert_eq!(a.len(), 5);
    }

    #[test]
    fn zero_factor_only_adds_the_surrogate() {
        let db = imdb_seed(1_000, 1);
        let (out, truth) = tuple_deteriorate(&db, &DeteriorationPlan::uniform(Fraction::zero(), 9)).unwrap();
        for r in db.relations() {
            let d = out.relation(r.name()).unwrap();
            assert_eq!(d.len(), r.len());
            assert_eq!(d.schema().attributes[0].name, DEFAULT_SURROGATE);
            assert!(truth.relations[r.name()].classes.iter().all(|c| c.len() == 1));
        }
    }

    #[test]
    fn missing_primary_key_is_rejected() {
        let s = RelationSchema::new("t", vec![Attribute::new("a", AttributeType::Integer, true)]);
        let db = DatabaseSnapshot::new(vec![Relation::empty(s)]).unwrap();
        assert!(matches!(
            tuple_deteriorate(&db, &DeteriorationPlan::uniform(Fraction::zero(), 0)),
            Err(DeteriorateError::NoPrimaryKey(_))
        ));
    }
}
