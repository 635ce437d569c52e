use chrono::{Days, NaiveDate};
use proptest::prelude::*;

use rankmc::harness::{randomize_preferences, Randomization};
use rankmc::ingest::{aggregate_matches, obscure_edges, DateWindow, MatchRecord, Outcome, PointScheme};
use rankmc::metrics::{prediction_score, Diagnostics, MatchResult, RankingResult};
use rankmc::model::{sample_erdos_renyi, simulate_btl, EdgeSet};
use rankmc::ratio::{build_ratio_matrix, truncate_observations, truncation_floor};
use rankmc::report::RankingReport;
use rankmc::rng::substream;
use rankmc::root::RootFinder;

fn records() -> impl Strategy<Value = Vec<MatchRecord>> {
    let team = prop::sample::select(vec!["ant", "bee", "cat", "dog", "eel"]);
    let outcome = prop::sample::select(vec![Outcome::A, Outcome::B, Outcome::Tie]);
    prop::collection::vec((team.clone(), team, outcome, 0u64..400), 2..60).prop_map(|rows| {
        let day0 = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        rows.into_iter()
            .filter(|(a, b, _, _)| a != b)
            .map(|(a, b, o, d)| MatchRecord {
                date: day0 + Days::new(d),
                side_a: a.to_string(),
                side_b: b.to_string(),
                outcome: o,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn aggregation_ignores_record_order(mut rs in records(), seed in any::<u64>()) {
        prop_assume!(rs.len() >= 2);
        let first = aggregate_matches(&rs, PointScheme::FOOTBALL, DateWindow::default());
        let mut rng = substream(seed, &[]);
        use rand::seq::SliceRandom;
        rs.shuffle(&mut rng);
        let second = aggregate_matches(&rs, PointScheme::FOOTBALL, DateWindow::default());
        prop_assert_eq!(first, second);
    }

    #[test]
    fn window_boundaries_are_half_open(rs in records(), start in 0u64..300, len in 1u64..200) {
        let day0 = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        let w = DateWindow { start: Some(day0 + Days::new(start)), end: Some(day0 + Days::new(start + len)) };
        let inside: Vec<&MatchRecord> = rs.iter().filter(|r| w.contains(r.date)).collect();
        for r in &inside {
            prop_assert!(r.date >= w.start.unwrap() && r.date < w.end.unwrap());
        }
        if let Ok(agg) = aggregate_matches(&rs, PointScheme::WEATHER, w) {
            let total: u32 = agg.e.pairs().iter().map(|&(i, j)| agg.counts.get(i, j)).sum();
            prop_assert_eq!(total as usize, inside.len());
        }
    }

    #[test]
    fn ranking_json_round_trips(raw in prop::collection::vec(1e-9f64..1e3, 1..30), iters in 0usize..1000, seed in any::<Option<u64>>()) {
        let result = RankingResult::from_unnormalized(&raw, Diagnostics { iterations: iters, residual: raw[0] * 1e-7, rmax_used: Some(raw[0]), ..Diagnostics::default() }).unwrap();
        let names: Vec<String> = (0..raw.len()).map(|k| format!("item{k}")).collect();
        let report = RankingReport::new("mcmle", &names, &result, seed);
        prop_assert_eq!(RankingReport::from_json(&report.to_json()).unwrap(), report);
    }

    #[test]
    fn swapping_rankings_swaps_scores(
        (a, b, games) in (2usize..9).prop_flat_map(|n| (
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            prop::collection::vec((0..n, 0..n, any::<bool>()), 0..20),
        ))
    ) {
        let ms: Vec<MatchResult<usize>> = games
            .into_iter()
            .map(|(x, y, tie)| if tie { MatchResult::Tie(x, y) } else { MatchResult::Decisive { winner: x, loser: y } })
            .collect();
        let (sa, sb) = prediction_score(&a, &b, &ms).unwrap();
        prop_assert_eq!(prediction_score(&b, &a, &ms).unwrap(), (sb, sa));
    }

    #[test]
    fn root_finder_brackets_monotone_roots(root in 0.001f64..0.999, slope in 0.1f64..50.0, tol in 1e-12f64..1e-4) {
        let f = |z: f64| slope * (z - root) + (z - root).powi(3);
        for finder in [RootFinder::bisection(tol), RootFinder::brent(tol)] {
            let r = finder.solve(f, 0.0, 1.0).unwrap();
            prop_assert!((r.x - root).abs() <= tol, "{:?} {}", r, root);
        }
    }

    #[test]
    fn truncated_ratios_are_bounded(n in 3usize..15, seed in any::<u64>(), l in 1u32..8, c_r in 1.0f64..3.0) {
        let w = randomize_preferences(n, 4.0, &mut substream(seed, &[0]), Randomization::Affine).unwrap();
        let e = sample_erdos_renyi(n, 0.7, &mut substream(seed, &[1])).unwrap();
        let (y, _) = simulate_btl(&w, &e, l, seed).unwrap();
        let yt = truncate_observations(&y, &e, 4.0, c_r).unwrap();
        let floor = truncation_floor(4.0, c_r).unwrap();
        let m = build_ratio_matrix(&yt, &e).unwrap();
        for &(i, j) in e.pairs() {
            prop_assert!(yt.get(i, j) >= floor && yt.get(j, i) >= floor);
            prop_assert!(m.get(i, j) <= c_r * 4.0 * (1.0 + 1e-12));
        }
    }
}

#[test]
fn obscuring_is_binomial() {
    let e = EdgeSet::from_pairs(50, (0..50).flat_map(|i| (i + 1..50).map(move |j| (i, j))).take(1000)).unwrap();
    assert_eq!(e.len(), 1000);
    let sd = (1000.0f64 * 0.7 * 0.3).sqrt();
    for seed in 0..40 {
        let kept = obscure_edges(&e, 0.7, &mut substream(seed, &[])).unwrap().len() as f64;
        assert!((kept - 700.0).abs() <= 3.0 * sd, "seed {seed}: {kept}");
    }
}

#[test]
fn power_iteration_matches_dense_svd() {
    use rankmc::spectral::top_singular_vector;
    let mut checked = 0;
    for seed in 0..20u64 {
        let n = 6 + (seed as usize % 10);
        let w = randomize_preferences(n, 5.0, &mut substream(seed, &[0]), Randomization::Affine).unwrap();
        let e = sample_erdos_renyi(n, 0.6, &mut substream(seed, &[1])).unwrap();
        let (y, _) = simulate_btl(&w, &e, 7, seed).unwrap();
        let m = build_ratio_matrix(&truncate_observations(&y, &e, 5.0, 1.4).unwrap(), &e).unwrap();
        let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| if m.is_observed(i, j) { m.get(i, j) / 0.6 } else { 0.0 });
        let svd = dense.svd(true, false);
        let (k, s0) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, &s)| if s > best.1 { (k, s) } else { best });
        let gap = svd.singular_values.iter().filter(|&&s| s < s0).fold(0.0f64, |g, &s| g.max(s));
        if s0 - gap < 1e-3 * s0 {
            continue;
        }
        let oracle = svd.u.unwrap().column(k).into_owned();
        let sv = top_singular_vector(&m, 0.6, 1e-13).unwrap();
        let dot: f64 = oracle.iter().zip(&sv.factor.values).map(|(a, b)| a * b).sum();
        assert!(dot.abs() > 1.0 - 1e-9, "seed {seed}: |<u, u*>| = {}", dot.abs());
        assert!((sv.sigma - s0).abs() <= 1e-8 * s0, "seed {seed}: {} vs {s0}", sv.sigma);
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} well-separated cases");
}
