//! Random database generators and brute-force oracles shared by the
//! property tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redhunt_core::decision::{Decision, DecisionLog};
use redhunt_core::model::{Attribute, AttributeType, DatabaseSnapshot, ForeignKey, Relation, RelationSchema, Value};
use redhunt_core::similarity::{Canonicalizer, SimilarityPolicy};
use redhunt_core::Fraction;

/// Shape of one generated relation, kept next to the data for the oracle.
#[derive(Debug, Clone)]
pub struct GenRelation {
    pub name: String,
    pub natural_key: Vec<String>,
    /// FK column -> referenced relation (always its `id`).
    pub foreign: Option<String>,
    pub similarity: SimilarityPolicy,
}

#[derive(Debug, Clone)]
pub struct GenDb {
    pub db: DatabaseSnapshot,
    pub log: DecisionLog,
    /// Relations in creation order; a relation only references earlier ones.
    pub relations: Vec<GenRelation>,
}

const TEXTS: [&str; 6] = ["x", "X", "y", "Y", "z", " z"];

fn text(rng: &mut ChaCha8Rng) -> Value {
    Value::text(*TEXTS.choose(rng).unwrap())
}

fn small_int(rng: &mut ChaCha8Rng) -> Value {
    if rng.gen_bool(0.15) {
        Value::Null
    } else {
        Value::Integer(rng.gen_range(0..4))
    }
}

/// An acyclic database of 2 to 4 relations with at most 50 rows each, with
/// a surrogate `id` per relation and duplicated entities under fresh ids.
pub fn random_db(seed: u64) -> GenDb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=4);
    let mut relations = Vec::new();
    let mut built: Vec<Relation> = Vec::new();
    let mut log = DecisionLog::new();
    for i in 0..n {
        let name = format!("r{i}");
        let foreign = (i > 0 && rng.gen_bool(0.85)).then(|| format!("r{}", rng.gen_range(0..i)));
        let mut attrs = vec![
            Attribute::new("id", AttributeType::Integer, false),
            Attribute::new("a", AttributeType::Text, false),
            Attribute::new("b", AttributeType::Integer, true),
        ];
        if foreign.is_some() {
            attrs.push(Attribute::new("fk", AttributeType::Integer, true));
        }
        attrs.push(Attribute::new("noise", AttributeType::Integer, true));
        let mut schema = RelationSchema::new(&name, attrs).with_primary_key(&["id"]);
        if let Some(t) = &foreign {
            schema = schema.with_foreign_key(ForeignKey::new("fk", t, "id"));
        }

        let mut pool: Vec<&str> = vec!["a", "b"];
        if foreign.is_some() {
            pool.push("fk");
        }
        let mut natural_key: Vec<String> = pool.iter().filter(|_| rng.gen_bool(0.6)).map(|s| s.to_string()).collect();
        if natural_key.is_empty() {
            natural_key.push(pool.choose(&mut rng).unwrap().to_string());
        }
        let mut similarity = SimilarityPolicy::exact();
        if rng.gen_bool(0.4) {
            let c = *[Canonicalizer::CaseFold, Canonicalizer::TrimCaseFold, Canonicalizer::Trim]
                .choose(&mut rng)
                .unwrap();
            similarity.set("a", c);
        }

        let targets: Vec<Value> = match &foreign {
            Some(t) => built.iter().find(|r| r.name() == t).unwrap().column("id").unwrap().into_iter().cloned().collect(),
            None => Vec::new(),
        };
        let pick_fk = |rng: &mut ChaCha8Rng| -> Value {
            if targets.is_empty() || rng.gen_bool(0.1) {
                Value::Null
            } else {
                targets.choose(rng).unwrap().clone()
            }
        };

        let base = rng.gen_range(1..=25);
        let mut rows: Vec<Vec<Value>> = Vec::new();
        for _ in 0..base {
            let mut row = vec![Value::Null, text(&mut rng), small_int(&mut rng)];
            if foreign.is_some() {
                row.push(pick_fk(&mut rng));
            }
            row.push(small_int(&mut rng));
            rows.push(row);
        }
        // Duplicate entities under fresh ids, re-drawing the FK so that
        // references spread over a target class.
        let dups = rng.gen_range(0..=(50 - base).min(base));
        for _ in 0..dups {
            let mut row = rows[rng.gen_range(0..base)].clone();
            let last = row.len() - 1;
            row[last] = small_int(&mut rng);
            if foreign.is_some() && rng.gen_bool(0.5) {
                row[3] = pick_fk(&mut rng);
            }
            rows.push(row);
        }
        let mut ids: Vec<i64> = (0..rows.len() as i64).map(|k| 1000 * i as i64 + k).collect();
        ids.shuffle(&mut rng);
        for (row, id) in rows.iter_mut().zip(ids) {
            row[0] = Value::Integer(id);
        }
        built.push(Relation::from_rows(schema, rows).unwrap());

        log.append(&name, Decision::TagSurrogate { attribute: "id".into(), force: false });
        log.append(&name, Decision::DeclareNaturalKey { attributes: natural_key.clone() });
        if similarity.get("a") != Canonicalizer::Identity {
            log.append(&name, Decision::SetSimilarity { attribute: "a".into(), canonicalizer: similarity.get("a") });
        }
        relations.push(GenRelation { name, natural_key, foreign, similarity });
    }
    GenDb {
        db: DatabaseSnapshot::new(built).unwrap(),
        log,
        relations,
    }
}

/// Equivalence classes of `id` values per relation, recomputed from the
/// inductive definition: pairwise duplicate test on every attribute of the
/// natural key (recursing into the referenced relation for FK attributes),
/// then transitive closure by Floyd-Warshall. Classes are sorted.
pub fn au_oracle(g: &GenDb, db: &DatabaseSnapshot) -> BTreeMap<String, Vec<Vec<Value>>> {
    let mut classes: BTreeMap<String, Vec<Vec<Value>>> = BTreeMap::new();
    // id value -> class index, per relation
    let mut class_of: BTreeMap<String, BTreeMap<Value, usize>> = BTreeMap::new();
    for spec in &g.relations {
        let r = db.relation(&spec.name).unwrap();
        let n = r.len();
        let id = r.position("id").unwrap();
        let nk: Vec<(usize, bool)> = spec
            .natural_key
            .iter()
            .map(|a| (r.position(a).unwrap(), a == "fk"))
            .collect();
        let similar = |attr: &str, x: &Value, y: &Value| spec.similarity.canonical(attr, x) == spec.similarity.canonical(attr, y);
        let mut reach = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (t1, t2) = (&r.rows()[i], &r.rows()[j]);
                reach[i][j] = t1[id] == t2[id]
                    || nk.iter().all(|&(p, is_fk)| {
                        if is_fk {
                            let target = &class_of[spec.foreign.as_ref().unwrap()];
                            t1[p] == t2[p]
                                || matches!((target.get(&t1[p]), target.get(&t2[p])), (Some(a), Some(b)) if a == b)
                        } else {
                            similar(r.schema().attributes[p].name.as_str(), &t1[p], &t2[p])
                        }
                    });
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut sets: BTreeSet<Vec<Value>> = BTreeSet::new();
        for i in 0..n {
            let mut set: Vec<Value> = (0..n).filter(|&j| reach[i][j]).map(|j| r.rows()[j][id].clone()).collect();
            set.sort();
            set.dedup();
            sets.insert(set);
        }
        let sets: Vec<Vec<Value>> = sets.into_iter().collect();
        let mut map = BTreeMap::new();
        for (k, set) in sets.iter().enumerate() {
            for v in set {
                map.insert(v.clone(), k);
            }
        }
        class_of.insert(spec.name.clone(), map);
        classes.insert(spec.name.clone(), sets);
    }
    classes
}

/// A random relation for the g3 oracle: up to 8 rows over up to 4 small
/// integer attributes, Nulls included.
pub fn random_small_relation(seed: u64) -> Relation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arity = rng.gen_range(2..=4);
    let attrs = (0..arity).map(|k| Attribute::new(format!("c{k}"), AttributeType::Integer, true)).collect();
    let rows = (0..rng.gen_range(0..=8))
        .map(|_| {
            (0..arity)
                .map(|_| if rng.gen_bool(0.2) { Value::Null } else { Value::Integer(rng.gen_range(0..3)) })
                .collect()
        })
        .collect();
    Relation::from_rows(RelationSchema::new("t", attrs), rows).unwrap()
}

/// g3 by exhaustive search: the largest row subset on which `lhs -> rhs`
/// holds (Null equal to Null), as the fraction of rows left out.
pub fn g3_oracle(r: &Relation, lhs: &[usize], rhs: usize) -> Fraction {
    let n = r.len();
    if n == 0 {
        return Fraction::zero();
    }
    let rows = r.rows();
    let mut best = 0;
    for mask in 0u32..(1 << n) {
        let keep: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        if keep.len() <= best {
            continue;
        }
        let holds = keep.iter().all(|&i| {
            keep.iter()
                .all(|&j| lhs.iter().any(|&p| rows[i][p] != rows[j][p]) || rows[i][rhs] == rows[j][rhs])
        });
        if holds {
            best = keep.len();
        }
    }
    Fraction::new((n - best) as u64, n as u64)
}
