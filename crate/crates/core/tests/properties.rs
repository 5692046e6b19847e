mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use proptest::prelude::*;
use redhunt_core::auclean::{removing_au, verify_no_au};
use redhunt_core::decision::StabilityClass;
use redhunt_core::elicitation::ElicitationSession;
use redhunt_core::model::{Attribute, AttributeType, Relation, RelationSchema, Value};
use redhunt_core::normalize::{apply_expert_overrides, classify_stability, decompose, reduce, HistorizationSpec, NormalizeError};
use redhunt_core::profiling::{attribute_profile, g3};
use redhunt_core::similarity::SimilarityPolicy;
use redhunt_core::DatabaseSnapshot;

use common::{au_oracle, g3_oracle, random_db, random_small_relation};

fn singletons(classes: &BTreeMap<String, Vec<Vec<Value>>>) -> bool {
    classes.values().flatten().all(|c| c.len() == 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn profile_counts_partition_the_relation(seed in any::<u64>()) {
        let r = random_small_relation(seed);
        for a in r.schema().attribute_names() {
            let p = attribute_profile(&r, a).unwrap();
            let col = r.column(a).unwrap();
            let nulls = col.iter().filter(|v| v.is_null()).count() as u64;
            let distinct: BTreeSet<&&Value> = col.iter().filter(|v| !v.is_null()).collect();
            prop_assert_eq!(p.nv(), nulls);
            prop_assert_eq!(p.dv(), distinct.len() as u64);
            prop_assert_eq!(p.dv() + p.nv() + p.ov(), r.len() as u64);
        }
    }

    #[test]
    fn g3_matches_exhaustive_search(seed in any::<u64>(), mask in 1u8..16, rhs in 0usize..4) {
        let r = random_small_relation(seed);
        let arity = r.schema().arity();
        let rhs = rhs % arity;
        let lhs: Vec<usize> = (0..arity).filter(|&k| k != rhs && mask & (1 << k) != 0).collect();
        let names: Vec<&str> = lhs.iter().map(|&k| r.schema().attributes[k].name.as_str()).collect();
        let got = g3(&r, &names, &r.schema().attributes[rhs].name, &SimilarityPolicy::exact()).unwrap();
        prop_assert_eq!(got, g3_oracle(&r, &lhs, rhs));
    }

    #[test]
    fn cleaning_removes_all_artificial_unicity(seed in any::<u64>()) {
        let g = random_db(seed);
        let session = ElicitationSession::replay(Arc::new(g.db.clone()), &g.log).unwrap();
        let (cleaned, report) = removing_au(&session).unwrap();

        // Classes found by the engine are those of the inductive definition.
        let expected = au_oracle(&g, &g.db);
        for (rel, classes) in &expected {
            let m = report.mapping(rel, "id").unwrap();
            prop_assert_eq!(&m.classes, classes, "relation {}", rel);
        }
        // No duplicates left, by both the engine and the oracle.
        prop_assert!(verify_no_au(&cleaned, &session).unwrap().is_empty());
        prop_assert!(singletons(&au_oracle(&g, &cleaned)));
        // Cleaning rewrites values only.
        for r in g.db.relations() {
            prop_assert_eq!(cleaned.relation(r.name()).unwrap().len(), r.len());
        }
    }

    #[test]
    fn cleaning_is_idempotent_and_deterministic(seed in any::<u64>()) {
        let g = random_db(seed);
        let session = ElicitationSession::replay(Arc::new(g.db.clone()), &g.log).unwrap();
        let (once, _) = removing_au(&session).unwrap();
        let (again, _) = removing_au(&session).unwrap();
        prop_assert_eq!(&once, &again);
        let second = ElicitationSession::replay(Arc::new(once.clone()), &g.log).unwrap();
        let (twice, report) = removing_au(&second).unwrap();
        prop_assert_eq!(twice, once);
        prop_assert!(report.mappings.values().flatten().all(|m| m.is_identity()));
    }

    #[test]
    fn reduce_is_idempotent(seed in any::<u64>()) {
        let g = random_db(seed);
        let once = reduce(&g.db);
        prop_assert_eq!(reduce(&once), once.clone());
        for r in once.relations() {
            prop_assert_eq!(r.distinct().len(), r.len());
        }
    }

    #[test]
    fn decomposition_preserves_information(rows in prop::collection::vec((0i64..4, 0i64..3, 0i64..3, 0i64..4), 1..20)) {
        let schema = RelationSchema::new("r", vec![
            Attribute::new("sk", AttributeType::Integer, false),
            Attribute::new("k", AttributeType::Integer, false),
            Attribute::new("u", AttributeType::Integer, false),
            Attribute::new("o", AttributeType::Integer, false),
        ]);
        let data: Vec<Vec<Value>> = rows
            .iter()
            .map(|&(sk, u, o, _)| vec![Value::Integer(sk), Value::Integer(sk % 2), Value::Integer(u), Value::Integer(o)])
            .collect();
        let r = Relation::from_rows(schema, data).unwrap();
        let db = DatabaseSnapshot::new(vec![r.clone()]).unwrap();
        let sks = vec!["sk".to_string()];
        let c = classify_stability(&r, &["k".to_string()], &sks, redhunt_core::Fraction::zero(), &SimilarityPolicy::exact()).unwrap();
        let overrides: BTreeMap<String, StabilityClass> = [
            ("u".to_string(), StabilityClass::Unstable),
            ("o".to_string(), StabilityClass::Stable),
        ].into();
        let c = apply_expert_overrides(c, &overrides).unwrap();
        let h = HistorizationSpec {
            relation: "r".into(),
            source_relation: "r".into(),
            attribute: "o".into(),
            join_fk: None,
            output_name: "at".into(),
            new_relation: "r_details".into(),
        };
        // Rows kept after collapsing on (sk, u), in ordinal order.
        let mut seen = BTreeSet::new();
        let kept: Vec<(i64, i64, i64)> = rows.iter().filter(|t| seen.insert((t.0, t.1))).map(|t| (t.0, t.1, t.2)).collect();
        let pairs: BTreeSet<(i64, i64)> = kept.iter().map(|t| (t.0, t.2)).collect();
        match decompose(&db, &c, &sks, "sk", &h) {
            Ok((out, Some(report))) => {
                prop_assert_eq!(pairs.len(), kept.len());
                prop_assert_eq!(report.collapsed, rows.len() - kept.len());
                let r1 = out.relation("r").unwrap();
                prop_assert_eq!(r1.sorted_rows(), r.project("r", &["sk", "k", "o"]).unwrap().sorted_rows());
                let r2 = out.relation("r_details").unwrap();
                let got: BTreeSet<(Value, Value)> = r2.rows().iter().map(|t| (t[0].clone(), t[2].clone())).collect();
                let want: BTreeSet<(Value, Value)> = rows.iter().map(|t| (Value::Integer(t.0), Value::Integer(t.1))).collect();
                prop_assert_eq!(got, want);
                prop_assert_eq!(r2.len(), kept.len());
            }
            Ok((_, None)) => prop_assert!(false, "u is unstable"),
            Err(NormalizeError::KeyCheckFailed { duplicates, .. }) => {
                prop_assert_eq!(duplicates, kept.len() - pairs.len());
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
