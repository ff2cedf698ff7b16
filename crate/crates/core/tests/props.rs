//! Property tests for the data-preparation and construction invariants.

use chrono::NaiveDate;
use proptest::prelude::*;
use std::collections::BTreeMap;

use panelkit::bartik::{build_bartik, leave_one_out_exposure};
use panelkit::exposure::aggregate_exposure;
use panelkit::panel::{
    aggregate_neighborhood_year, AggregateOptions, EducationLevel, PanelDataset, PostingRecord,
    StandardizeScope, VAR_JOB_SHARE,
};

fn posting(hood: u8, year: i32, month: u32, day: u32, wage: Option<f64>, occ: u8) -> PostingRecord {
    PostingRecord {
        posting_id: format!("p{hood}-{year}-{month}-{day}-{occ}"),
        company_id: format!("c{}", day % 3),
        neighborhood_id: format!("n{hood}"),
        posting_date: NaiveDate::from_ymd_opt(year, month, day).unwrap(),
        occupation_code: format!("occ{occ}"),
        industry_code: 'I',
        compensation_annual: wage,
        education: EducationLevel::ALL[(day as usize) % 7],
    }
}

fn postings_strategy() -> impl Strategy<Value = Vec<PostingRecord>> {
    proptest::collection::vec(
        (0u8..4, 2020i32..2023, 1u32..13, 1u32..28, proptest::option::of(30_000.0..400_000.0f64), 0u8..3),
        1..60,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .map(|(h, y, m, d, w, o)| posting(h, y, m, d, w, o))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn job_share_sums_to_one_within_year(ps in postings_strategy()) {
        let (panel, _) = aggregate_neighborhood_year(&ps, AggregateOptions::default()).unwrap();
        let mut by_year: BTreeMap<i32, f64> = BTreeMap::new();
        let share_id = panel.var_id(VAR_JOB_SHARE).unwrap();
        for obs in panel.observations() {
            if let Some(s) = obs.values[share_id] {
                *by_year.entry(obs.year).or_insert(0.0) += s;
            }
        }
        for (year, total) in by_year {
            prop_assert!((total - 1.0).abs() < 1e-12, "year {year} shares sum to {total}");
        }
    }

    #[test]
    fn aggregation_is_permutation_invariant(ps in postings_strategy().prop_shuffle()) {
        let mut sorted = ps.clone();
        sorted.sort_by(|a, b| a.posting_id.cmp(&b.posting_id));
        let (p1, _) = aggregate_neighborhood_year(&ps, AggregateOptions::default()).unwrap();
        let (p2, _) = aggregate_neighborhood_year(&sorted, AggregateOptions::default()).unwrap();
        prop_assert_eq!(p1.observations(), p2.observations());
    }

    #[test]
    fn standardize_is_idempotent(vals in proptest::collection::vec(-1e4..1e4f64, 3..40)) {
        // need at least two distinct values
        prop_assume!(vals.iter().any(|v| (v - vals[0]).abs() > 1e-6));
        let mut panel = PanelDataset::new(vec!["x"]).unwrap();
        for (i, v) in vals.iter().enumerate() {
            panel.push(format!("e{i}"), 2020, vec![Some(*v)]).unwrap();
        }
        panel.standardize("x", StandardizeScope::Pooled, None).unwrap();
        let once = panel.column("x").unwrap();
        panel.standardize("x", StandardizeScope::Pooled, None).unwrap();
        let twice = panel.column("x").unwrap();
        for (a, b) in once.iter().zip(twice.iter()) {
            prop_assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn exposure_aggregate_within_contributing_bounds(
        scores in proptest::collection::vec(0.0..1.0f64, 2..5),
        counts in proptest::collection::vec(1usize..6, 2..5),
    ) {
        let k = scores.len().min(counts.len());
        let mut score_map = BTreeMap::new();
        let mut ps = Vec::new();
        for (o, (&s, &c)) in scores.iter().zip(&counts).take(k).enumerate() {
            score_map.insert(format!("occ{o}"), s);
            for j in 0..c {
                ps.push(posting(0, 2022, 1, (j as u32 % 27) + 1, None, o as u8));
            }
        }
        let (exp, _) = aggregate_exposure(&score_map, &ps);
        let lo = scores[..k].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = scores[..k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in exp.values() {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn bartik_respects_convex_bounds(
        shares_raw in proptest::collection::vec(0.01..1.0f64, 2..6),
        loo in proptest::collection::vec(0.0..1.0f64, 2..6),
    ) {
        let k = shares_raw.len().min(loo.len());
        let total: f64 = shares_raw[..k].iter().sum();
        let mut share_map = BTreeMap::new();
        let mut loo_map = BTreeMap::new();
        let industries = ['A', 'B', 'C', 'D', 'E', 'F'];
        for j in 0..k {
            share_map.insert(("n".to_string(), industries[j]), shares_raw[j] / total);
            loo_map.insert(("n".to_string(), industries[j]), loo[j]);
        }
        let b = build_bartik(&share_map, &loo_map);
        let lo = loo[..k].iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = loo[..k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(b["n"].raw >= lo - 1e-12 && b["n"].raw <= hi + 1e-12);
        prop_assert!((b["n"].coverage - 1.0).abs() < 1e-12);
    }

    #[test]
    fn leave_one_out_ignores_focal_weight(
        counts in proptest::collection::vec(1.0..20.0f64, 3..8),
        exposures in proptest::collection::vec(0.0..1.0f64, 3..8),
        focal_count in 0.0..50.0f64,
    ) {
        let k = counts.len().min(exposures.len());
        let mut count_map = BTreeMap::new();
        let mut exp_map = BTreeMap::new();
        for j in 0..k {
            count_map.insert(format!("n{j}"), counts[j]);
            exp_map.insert(format!("n{j}"), exposures[j]);
        }
        let base = leave_one_out_exposure(&count_map, &exp_map, "n0").unwrap();
        // changing the focal neighborhood's own count never moves the mean
        count_map.insert("n0".to_string(), focal_count);
        let changed = leave_one_out_exposure(&count_map, &exp_map, "n0").unwrap();
        prop_assert!((base - changed).abs() < 1e-12);
    }
}
