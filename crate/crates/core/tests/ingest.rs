mod common;

use std::collections::{BTreeSet, HashMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use common::{exhaustive_fixed_point, ids, peeling_fixed_point};
use proptest::prelude::*;
use wdrec_core::ingest::{
    build_matrix, filter_active, parse_edits, remove_outliers, split_holdout, stats, EditEvent, FilterMode,
    InteractionMatrix, SplitSpec,
};

/// Items per editor in the 10×20 fixture; editor `i` edits the run of
/// items starting at `3i mod 20`. 3+4+5+6+7+3+4+5+6+4 = 47 pairs.
const RUNS: [usize; 10] = [3, 4, 5, 6, 7, 3, 4, 5, 6, 4];

fn fixture_csv() -> String {
    let mut out = String::from("editor_id,item_id,timestamp,comment\n");
    let mut minute = 0;
    for (i, &len) in RUNS.iter().enumerate() {
        for k in 0..len {
            let j = (3 * i + k) % 20;
            // editors 0 and 4 revisit their first item twice more
            let repeats = if (i == 0 || i == 4) && k == 0 { 3 } else { 1 };
            for _ in 0..repeats {
                out.push_str(&format!("u{i},Q{j},2020-01-0{} {:02}:{:02}:00,edit\n", 1 + minute / 1440, minute / 60 % 24, minute % 60));
                minute += 7;
            }
        }
    }
    out
}

fn fixture_events() -> Vec<EditEvent> {
    parse_edits(fixture_csv().as_bytes()).unwrap()
}

#[test]
fn fixture_has_47_distinct_pairs() {
    let events = fixture_events();
    assert_eq!(events.len(), 47 + 4);
    let m = build_matrix(&events).unwrap();
    let distinct: HashSet<(&str, &str)> = events.iter().map(|e| (e.editor_id.as_str(), e.item_id.as_str())).collect();
    assert_eq!(distinct.len(), 47);
    assert_eq!(m.n_interactions(), 47);
    assert_eq!((m.n_editors(), m.n_items()), (10, 20));
}

#[test]
fn fixture_stats_match_direct_recount() {
    let events = fixture_events();
    let m = build_matrix(&events).unwrap();
    let s = stats(&m, &events);
    let mut per_editor: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut per_item: HashMap<&str, HashSet<&str>> = HashMap::new();
    let mut edits: HashMap<&str, usize> = HashMap::new();
    for e in &events {
        per_editor.entry(&e.editor_id).or_default().insert(&e.item_id);
        per_item.entry(&e.item_id).or_default().insert(&e.editor_id);
        *edits.entry(&e.editor_id).or_default() += 1;
    }
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    };
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ipe: Vec<f64> = per_editor.values().map(|s| s.len() as f64).collect();
    let epi: Vec<f64> = per_item.values().map(|s| s.len() as f64).collect();
    let epe: Vec<f64> = edits.values().map(|&c| c as f64).collect();
    assert_eq!(s.items_per_editor.median, median(ipe.clone()));
    assert_eq!(s.items_per_editor.median, 4.5);
    assert!((s.items_per_editor.mean - mean(&ipe)).abs() < 1e-12);
    assert!((s.items_per_editor.mean - 4.7).abs() < 1e-12);
    assert_eq!(s.editors_per_item.median, median(epi.clone()));
    assert!((s.editors_per_item.mean - mean(&epi)).abs() < 1e-12);
    assert_eq!(s.edits_per_editor.median, median(epe.clone()));
    assert!((s.edits_per_editor.mean - mean(&epe)).abs() < 1e-12);
    assert_eq!(s.n_edits, 51);
    assert!((s.sparsity - (1.0 - 47.0 / 200.0)).abs() < 1e-15);
}

fn survivors(m: &InteractionMatrix, f: &InteractionMatrix) -> (BTreeSet<usize>, BTreeSet<usize>) {
    (
        f.editors().iter().map(|id| m.editor_index(id).unwrap()).collect(),
        f.items().iter().map(|id| m.item_index(id).unwrap()).collect(),
    )
}

#[test]
fn fixture_filter_matches_peeling_oracle() {
    let m = build_matrix(&fixture_events()).unwrap();
    let f = filter_active(&m, 3, 2, FilterMode::FixedPoint).unwrap();
    assert_eq!(survivors(&m, &f), peeling_fixed_point(&m, 3, 2));
    assert!(f.n_editors() > 0, "fixture should keep a core");
}

fn event(editor: &str, item: &str, t: DateTime<Utc>) -> EditEvent {
    EditEvent::new(editor, item, t, "")
}

/// Peak count over windows `[t, t + 1h)` anchored at every event, by
/// scanning all pairs.
fn quadratic_peak(times: &[DateTime<Utc>]) -> usize {
    times
        .iter()
        .map(|&a| times.iter().filter(|&&b| b >= a && b < a + Duration::hours(1)).count())
        .max()
        .unwrap_or(0)
}

#[test]
fn burst_removal_matches_window_scan() {
    let t0 = DateTime::parse_from_rfc3339("2021-03-01T00:00:00Z").unwrap().with_timezone(&Utc);
    let mut events = Vec::new();
    // steady editors
    for k in 0..200 {
        events.push(event("steady", &format!("Q{k}"), t0 + Duration::minutes(31 * k)));
    }
    // 130 edits inside 40 minutes
    for k in 0..130 {
        events.push(event("bot", &format!("Q{}", k % 50), t0 + Duration::seconds(18 * k)));
    }
    // exactly 120 in one hour then a pause: at the threshold, kept
    for k in 0..120 {
        events.push(event("edge", &format!("Q{k}"), t0 + Duration::seconds(30 * k)));
    }
    // 121 edits spread so that only a window straddling two bursts exceeds 120
    for k in 0..61 {
        events.push(event("split", "Q1", t0 + Duration::minutes(50) + Duration::seconds(k)));
        events.push(event("split", "Q2", t0 + Duration::minutes(100) + Duration::seconds(k)));
    }
    events.sort_by_key(|e| e.timestamp);
    let threshold = 120.0;
    let (kept, report) = remove_outliers(&events, threshold).unwrap();

    let mut by_editor: HashMap<&str, Vec<DateTime<Utc>>> = HashMap::new();
    for e in &events {
        by_editor.entry(&e.editor_id).or_default().push(e.timestamp);
    }
    let expected: BTreeSet<&str> = by_editor
        .iter()
        .filter(|(_, ts)| quadratic_peak(ts) as f64 > threshold)
        .map(|(id, _)| *id)
        .collect();
    let removed: BTreeSet<&str> = report.removed_editors.iter().map(String::as_str).collect();
    assert_eq!(removed, expected);
    assert_eq!(removed, BTreeSet::from(["bot", "split"]));
    assert!(kept.iter().all(|e| !removed.contains(e.editor_id.as_str())));
    assert_eq!(kept.len(), 200 + 120);
}

#[test]
fn split_is_deterministic_and_seed_sensitive() {
    let m = build_matrix(&fixture_events()).unwrap();
    let spec = SplitSpec {
        seed: 1,
        cold_start_max: 0,
        ..SplitSpec::default()
    };
    assert_eq!(split_holdout(&m, &spec).unwrap(), split_holdout(&m, &spec).unwrap());
    let other = split_holdout(&m, &SplitSpec { seed: 2, ..spec }).unwrap();
    assert_ne!(split_holdout(&m, &spec).unwrap().test, other.test);
}

fn small_matrix() -> impl Strategy<Value = InteractionMatrix> {
    (1usize..8, 1usize..8).prop_flat_map(|(n, m)| {
        proptest::collection::vec(proptest::bool::weighted(0.45), n * m)
            .prop_map(move |cells| {
                let pairs = (0..n * m).filter(|&k| cells[k]).map(|k| (k / m, k % m));
                InteractionMatrix::from_pairs(ids("u", n), ids("Q", m), pairs).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn filter_equals_exhaustive_fixed_point(m in small_matrix(), a in 1usize..4, b in 1usize..4) {
        let f = filter_active(&m, a, b, FilterMode::FixedPoint).unwrap();
        prop_assert_eq!(survivors(&m, &f), exhaustive_fixed_point(&m, a, b));
    }

    #[test]
    fn filter_output_meets_thresholds(m in small_matrix(), a in 1usize..4, b in 1usize..4) {
        let f = filter_active(&m, a, b, FilterMode::FixedPoint).unwrap();
        for row in f.rows() {
            prop_assert!(row.len() >= a);
        }
        for d in f.item_degrees() {
            prop_assert!(d >= b);
        }
    }

    #[test]
    fn duplicating_events_changes_nothing(m in small_matrix()) {
        let t = DateTime::from_timestamp(0, 0).unwrap();
        let events: Vec<EditEvent> = m.entries().map(|(i, j)| event(&m.editors()[i], &m.items()[j], t)).collect();
        prop_assume!(!events.is_empty());
        let doubled: Vec<EditEvent> = events.iter().chain(&events).cloned().collect();
        prop_assert_eq!(build_matrix(&events).unwrap(), build_matrix(&doubled).unwrap());
    }

    #[test]
    fn split_partitions_each_row(m in small_matrix(), seed in 0u64..1000) {
        let spec = SplitSpec { seed, cold_start_min: 2, cold_start_max: 3, ..SplitSpec::default() };
        let s = split_holdout(&m, &spec).unwrap();
        for i in 0..m.n_editors() {
            let row: BTreeSet<u32> = m.row(i).iter().copied().collect();
            let parts = [s.train.row(i), s.validation.row(i), s.test.row(i)];
            let total: usize = parts.iter().map(|p| p.len()).sum();
            let union: BTreeSet<u32> = parts.iter().flat_map(|p| p.iter().copied()).collect();
            prop_assert_eq!(total, row.len());
            prop_assert_eq!(&union, &row);
            if spec.is_cold_start(row.len()) {
                prop_assert_eq!(s.test.row(i).len(), row.len());
            }
        }
    }
}
