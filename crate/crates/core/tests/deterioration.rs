use std::sync::Arc;

use redhunt_core::deteriorate::{
    deteriorate, deteriorated_size, imdb_seed, injected_count, verify_recovery, DeteriorationPlan, DEFAULT_SURROGATE,
};
use redhunt_core::pipeline::{self, PipelineConfig, EXIT_OK};
use redhunt_core::Fraction;

fn round_trip(rows: usize, df: Fraction, multiplier: u32, seed: u64) {
    let seed_db = imdb_seed(rows, seed);
    let plan = DeteriorationPlan::uniform(df, seed).with_attribute_multiplier(multiplier);
    let (dirty, truth) = deteriorate(&seed_db, &plan).unwrap();
    for r in seed_db.relations() {
        let d = dirty.relation(r.name()).unwrap();
        assert_eq!(d.len() as u64, deteriorated_size(r.len() as u64, df), "{}", r.name());
        assert_eq!(d.schema().attributes[0].name, DEFAULT_SURROGATE);
    }
    let outcome = pipeline::run(Arc::new(dirty), &truth.scripted_decisions(), &PipelineConfig::default()).unwrap();
    assert_eq!(outcome.exit_code(), EXIT_OK, "{:?}", outcome.summary());
    let report = verify_recovery(&seed_db, &outcome.snapshot).unwrap();
    assert!(report.is_green(), "{report:?}");
}

#[test]
fn injected_count_rounds_half_down() {
    assert_eq!(injected_count(10, Fraction::new(1, 4)), 2);
    assert_eq!(injected_count(10, Fraction::new(27, 100)), 3);
    assert_eq!(injected_count(7, Fraction::new(1, 2)), 3);
    assert_eq!(injected_count(0, Fraction::new(1, 2)), 0);
}

#[test]
fn recovers_tuple_deterioration() {
    for (k, pct) in [10u64, 30, 50].into_iter().enumerate() {
        round_trip(600, Fraction::new(pct, 100), 1, k as u64);
    }
}

#[test]
fn recovers_attribute_deterioration() {
    round_trip(600, Fraction::new(30, 100), 2, 7);
    round_trip(600, Fraction::new(30, 100), 3, 8);
}

#[test]
fn deterioration_is_seeded() {
    let db = imdb_seed(300, 3);
    let plan = DeteriorationPlan::uniform(Fraction::new(1, 5), 11);
    let (a, ta) = deteriorate(&db, &plan).unwrap();
    let (b, tb) = deteriorate(&db, &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta.to_json(), tb.to_json());
    let (c, _) = deteriorate(&db, &DeteriorationPlan::uniform(Fraction::new(1, 5), 12)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn unchanged_snapshot_verifies_green() {
    let db = imdb_seed(300, 1);
    assert!(verify_recovery(&db, &db).unwrap().is_green());
    let (dirty, _) = deteriorate(&db, &DeteriorationPlan::uniform(Fraction::new(1, 5), 1)).unwrap();
    assert!(!verify_recovery(&db, &dirty).unwrap().is_green());
}
