//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Run with `cargo test -p redhunt-core --test acceptance`.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use redhunt_core::auclean::{equivalence_classes, removing_au, verify_no_au};
use redhunt_core::decision::{DecisionLog, StabilityClass};
use redhunt_core::deteriorate::{deteriorate, deteriorated_size, imdb_seed, verify_recovery, DeteriorationPlan};
use redhunt_core::elicitation::ElicitationSession;
use redhunt_core::model::{load_snapshot, DatabaseSnapshot, Value};
use redhunt_core::normalize::{apply_expert_overrides, classify_stability, decompose};
use redhunt_core::pipeline::{self, PipelineConfig, EXIT_OK};
use redhunt_core::profiling::g3;
use redhunt_core::similarity::SimilarityPolicy;
use redhunt_core::Fraction;

const GOLDEN_BUDGET: Duration = Duration::from_secs(1);
const CLEANING_CASES: u64 = 256;
const CLEANING_BUDGET: Duration = Duration::from_secs(60);
const G3_CASES: u64 = 600;
const G3_BUDGET: Duration = Duration::from_secs(30);
const ROUND_TRIP_ROWS: usize = 10_000;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(120);
const SCALE_SMALL: usize = 10_000;
const SCALE_LARGE: usize = 100_000;
const SCALE_MAX_RATIO: f64 = 15.0;
const DF_MAX_RATIO: f64 = 2.5;
const SCALE_REPEATS: usize = 3;
const SCALE_BUDGET: Duration = Duration::from_secs(300);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn ints(xs: &[i64]) -> Vec<Value> {
    xs.iter().map(|&x| Value::Integer(x)).collect()
}

fn perfect_pet_golden() -> Outcome {
    let start = Instant::now();
    let db = Arc::new(load_snapshot(fixtures().join("perfect_pet")).unwrap());
    let log = DecisionLog::load(fixtures().join("perfect_pet_decisions.jsonl")).unwrap();
    let expected = load_snapshot(fixtures().join("perfect_pet_expected")).unwrap();
    let session = ElicitationSession::replay(db.clone(), &log).unwrap();
    let mut failed = Vec::new();

    let m = equivalence_classes(db.relation("Microchip").unwrap(), "id_microchip", &["number".into()], &SimilarityPolicy::exact()).unwrap();
    if m.classes != vec![ints(&[611, 616, 620]), ints(&[613, 619]), ints(&[614, 617])] {
        failed.push("classes");
    }

    let (cleaned, _) = removing_au(&session).unwrap();
    let animal = cleaned.relation("Animal").unwrap();
    let hashes: Vec<Option<String>> = animal.column("hash_id").unwrap().iter().map(|v| v.to_text()).collect();
    let ids = animal.column("id_animal").unwrap().into_iter().cloned().collect::<Vec<_>>();
    let table3_hashes = ["227f1df55c", "4745dd610e", "9d5faf7fa6", "227f1df55c", "9d5faf7fa6", "4745dd610e", "227f1df55c"];
    if ids != ints(&[744, 746, 747, 744, 747, 746, 744])
        || hashes != table3_hashes.iter().map(|h| Some(h.to_string())).collect::<Vec<_>>()
        || animal.len() != 7
    {
        failed.push("cleaned Animal");
    }

    let sks = vec!["id_animal".to_string(), "hash_id".to_string()];
    let c = classify_stability(animal, &["id_microchip".to_string()], &sks, Fraction::zero(), &SimilarityPolicy::exact()).unwrap();
    let want = [("species", 0, 1), ("breed", 0, 1), ("name", 0, 1), ("gender", 0, 1), ("dob", 1, 7), ("weight", 3, 7), ("food", 1, 7)];
    let got: Vec<(&str, Fraction)> = c.entries.iter().map(|e| (e.attribute.as_str(), e.value)).collect();
    if got != want.iter().map(|&(a, n, d)| (a, Fraction::new(n, d))).collect::<Vec<_>>() {
        failed.push("stability");
    }

    let c = apply_expert_overrides(c, &BTreeMap::from([("dob".to_string(), StabilityClass::Stable)])).unwrap();
    let spec = session.state("Animal").unwrap().historization.clone().unwrap();
    let (split, _) = decompose(&cleaned, &c, &sks, "id_animal", &spec).unwrap();
    let details = split.relation("Animal_details").unwrap();
    let want_details = expected.relation("Animal_details").unwrap();
    if details.schema().attribute_names().ne(want_details.schema().attribute_names())
        || details.sorted_rows() != want_details.sorted_rows()
        || details.len() != 6
    {
        failed.push("decomposition");
    }

    let run = pipeline::run(db, &log, &PipelineConfig::default()).unwrap();
    let mut groups: BTreeMap<Value, usize> = BTreeMap::new();
    for v in run.snapshot.relation("Appointment").unwrap().column("id_animal").unwrap() {
        *groups.entry(v.clone()).or_default() += 1;
    }
    if run.exit_code() != EXIT_OK
        || run.snapshot.relation("Animal").unwrap().len() != 3
        || run.snapshot != expected
        || groups.values().copied().collect::<Vec<_>>() != vec![3, 2, 2]
    {
        failed.push("chase and reduction");
    }

    let elapsed = start.elapsed();
    if elapsed > GOLDEN_BUDGET {
        failed.push("runtime");
    }
    let detail = if failed.is_empty() {
        format!("5/5 sub-checks in {elapsed:.2?}")
    } else {
        format!("failed: {} ({elapsed:.2?})", failed.join(", "))
    };
    outcome(failed.is_empty(), detail)
}

fn cleaning_property() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut merged = 0usize;
    for seed in 0..CLEANING_CASES {
        let g = common::random_db(seed);
        let session = ElicitationSession::replay(Arc::new(g.db.clone()), &g.log).unwrap();
        let (cleaned, report) = removing_au(&session).unwrap();
        let oracle = common::au_oracle(&g, &g.db);
        let classes_agree = oracle.iter().all(|(rel, cls)| report.mapping(rel, "id").is_some_and(|m| &m.classes == cls));
        let residual = common::au_oracle(&g, &cleaned);
        let clean = verify_no_au(&cleaned, &session).unwrap().is_empty() && residual.values().flatten().all(|c| c.len() == 1);
        merged += oracle.values().flatten().filter(|c| c.len() > 1).count();
        if !classes_agree || !clean {
            bad.push(seed);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        bad.is_empty() && elapsed <= CLEANING_BUDGET,
        format!(
            "{} databases, {merged} non-trivial classes, failing seeds {bad:?}, {elapsed:.2?}",
            CLEANING_CASES
        ),
    )
}

fn g3_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut checks, mut mismatches) = (0usize, 0usize);
    for seed in 0..G3_CASES {
        let r = common::random_small_relation(seed);
        let arity = r.schema().arity();
        for rhs in 0..arity {
            for mask in 1u32..(1 << arity) {
                if mask & (1 << rhs) != 0 {
                    continue;
                }
                let lhs: Vec<usize> = (0..arity).filter(|k| mask & (1 << k) != 0).collect();
                let names: Vec<&str> = lhs.iter().map(|&k| r.schema().attributes[k].name.as_str()).collect();
                let got = g3(&r, &names, &r.schema().attributes[rhs].name, &SimilarityPolicy::exact()).unwrap();
                checks += 1;
                if got != common::g3_oracle(&r, &lhs, rhs) {
                    mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed <= G3_BUDGET,
        format!("{G3_CASES} relations, {checks} dependencies, {mismatches} mismatches, {elapsed:.2?}"),
    )
}

fn recover(seed_db: &DatabaseSnapshot, plan: &DeteriorationPlan) -> Result<(), String> {
    let (dirty, truth) = deteriorate(seed_db, plan).map_err(|e| e.to_string())?;
    for r in seed_db.relations() {
        let got = dirty.relation(r.name()).unwrap().len() as u64;
        if got != deteriorated_size(r.len() as u64, plan.default_factor) {
            return Err(format!("{} deteriorated to {got}", r.name()));
        }
    }
    let run = pipeline::run(Arc::new(dirty), &truth.scripted_decisions(), &PipelineConfig::default()).map_err(|e| e.to_string())?;
    if run.exit_code() != EXIT_OK {
        return Err(format!("exit {}", run.exit_code()));
    }
    let report = verify_recovery(seed_db, &run.snapshot).map_err(|e| e.to_string())?;
    match report.relations.iter().find(|r| !r.is_green()) {
        Some(r) => Err(format!("{r:?}")),
        None => Ok(()),
    }
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let seed_db = imdb_seed(ROUND_TRIP_ROWS, 2024);
    let mut plans: Vec<(String, DeteriorationPlan)> = [10, 20, 30, 40, 50]
        .into_iter()
        .map(|p| (format!("{p}%"), DeteriorationPlan::uniform(Fraction::new(p, 100), p)))
        .collect();
    for m in [2, 3] {
        plans.push((format!("30%x{m}"), DeteriorationPlan::uniform(Fraction::new(30, 100), 100 + m as u64).with_attribute_multiplier(m)));
    }
    let mut failed = Vec::new();
    for (label, plan) in &plans {
        if let Err(e) = recover(&seed_db, plan) {
            failed.push(format!("{label}: {e}"));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failed.is_empty() && elapsed <= ROUND_TRIP_BUDGET,
        format!("{} plans on {} rows, failures {failed:?}, {elapsed:.2?}", plans.len(), seed_db.total_rows()),
    )
}

/// Published relation sizes: original, then df = 10..50%.
const IMDB_SIZES: [(&str, [u64; 6]); 5] = [
    ("title", [10_676_539, 11_744_193, 12_811_847, 13_879_501, 14_947_154, 16_014_808]),
    ("name_basics", [13_398_186, 14_738_005, 16_077_823, 17_507_642, 18_757_460, 20_397_279]),
    ("title_episode", [8_167_420, 8_984_162, 9_800_904, 10_617_646, 11_434_389, 12_251_130]),
    ("title_ratings", [1_423_129, 1_565_442, 1_707_755, 1_850_068, 1_992_381, 2_134_698]),
    ("title_principals", [84_980_445, 93_478_489, 101_976_534, 110_474_578, 118_972_623, 127_470_667]),
];

/// Published cells no rounding of |r|·df reproduces consistently: four are
/// off by digits, title at 40% only matches truncation, which breaks
/// other cells.
const IMDB_ANOMALIES: [(&str, u64); 5] = [
    ("name_basics", 30),
    ("name_basics", 50),
    ("title", 40),
    ("title_episode", 40),
    ("title_ratings", 50),
];

fn size_formula() -> Outcome {
    let mut exact = 0;
    let mut off: Vec<(&str, u64)> = Vec::new();
    for (name, sizes) in IMDB_SIZES {
        for (k, pct) in [10u64, 20, 30, 40, 50].into_iter().enumerate() {
            if deteriorated_size(sizes[0], Fraction::new(pct, 100)) == sizes[k + 1] {
                exact += 1;
            } else {
                off.push((name, pct));
            }
        }
    }
    off.sort();
    let mut frozen = IMDB_ANOMALIES.to_vec();
    frozen.sort();
    outcome(
        off == frozen,
        format!("{exact}/25 published sizes reproduced, deviating cells {off:?} (frozen list of {})", frozen.len()),
    )
}

fn time_pipeline(rows: usize, pct: u64) -> Duration {
    let seed_db = imdb_seed(rows, 9);
    let (dirty, truth) = deteriorate(&seed_db, &DeteriorationPlan::uniform(Fraction::new(pct, 100), 9)).unwrap();
    let dirty = Arc::new(dirty);
    let log = truth.scripted_decisions();
    let mut times: Vec<Duration> = (0..SCALE_REPEATS)
        .map(|_| {
            let start = Instant::now();
            let run = pipeline::run(dirty.clone(), &log, &PipelineConfig::default()).unwrap();
            assert_eq!(run.exit_code(), EXIT_OK);
            start.elapsed()
        })
        .collect();
    times.sort();
    times[SCALE_REPEATS / 2]
}

fn quasi_linearity() -> Outcome {
    let start = Instant::now();
    let small = time_pipeline(SCALE_SMALL, 10);
    let large = time_pipeline(SCALE_LARGE, 10);
    let df_low = time_pipeline(SCALE_LARGE / 2, 10);
    let df_high = time_pipeline(SCALE_LARGE / 2, 50);
    let size_ratio = large.as_secs_f64() / small.as_secs_f64();
    let df_ratio = df_high.as_secs_f64() / df_low.as_secs_f64();
    let elapsed = start.elapsed();
    outcome(
        size_ratio <= SCALE_MAX_RATIO && df_ratio <= DF_MAX_RATIO && elapsed <= SCALE_BUDGET,
        format!(
            "10k {small:.2?} vs 100k {large:.2?} ratio {size_ratio:.2} (max {SCALE_MAX_RATIO}); df 50% vs 10% ratio {df_ratio:.2} (max {DF_MAX_RATIO}); {elapsed:.2?}"
        ),
    )
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let seed_db = imdb_seed(2_000, 5);
    let (dirty, truth) = deteriorate(&seed_db, &DeteriorationPlan::uniform(Fraction::new(30, 100), 5)).unwrap();
    let dirty_dir = tmp.path().join("dirty");
    redhunt_core::model::store_snapshot(&dirty, &dirty_dir).unwrap();
    let dirty_log = tmp.path().join("dirty.jsonl");
    truth.scripted_decisions().store(&dirty_log).unwrap();

    let inputs = [
        ("perfect_pet", fixtures().join("perfect_pet"), fixtures().join("perfect_pet_decisions.jsonl")),
        ("imdb", dirty_dir, dirty_log),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (label, snapshot, log) in &inputs {
        let trees: Vec<_> = ["a", "b"]
            .iter()
            .map(|run| {
                let out = tmp.path().join(format!("{label}_{run}"));
                pipeline::run_pipeline(snapshot, log, &out, &PipelineConfig::default()).unwrap();
                read_tree(&out)
            })
            .collect();
        files += trees[0].len();
        if trees[0] != trees[1] {
            differing.push(*label);
        }
    }
    outcome(differing.is_empty(), format!("{files} files compared, differing inputs {differing:?}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("perfect-pet golden run", perfect_pet_golden),
        ("cleaning leaves no artificial unicity", cleaning_property),
        ("g3 matches exhaustive search", g3_equivalence),
        ("deterioration round trip", round_trip),
        ("deteriorated size formula", size_formula),
        ("quasi-linear runtime", quasi_linearity),
        ("decision-log determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.pass);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
