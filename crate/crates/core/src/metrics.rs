//! Ranking results, rank-error metrics and the match-prediction scoring rule.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{RankError, Result};

/// Solver bookkeeping attached to every ranking.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Final convergence measure of the solver that produced the ranking.
    pub residual: f64,
    pub rmax_used: Option<f64>,
    /// The spectral start was sign-flipped (also applied by the noiseless solver).
    pub sign_fixed: bool,
    /// The spectral start collapsed and the uniform vector was used.
    pub degenerate_init: bool,
    /// Factor entries that kept their previous value for lack of observations.
    pub degenerate_updates: usize,
    /// Sampling probability that guarantees noiseless recovery (`gamma = 1`).
    pub min_pobs_bound: Option<f64>,
}

/// Scores with `max = 1` and the induced descending ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingResult {
    pub scores: Vec<f64>,
    pub order: Vec<usize>,
    pub diagnostics: Diagnostics,
}

impl RankingResult {
    /// Divides by the maximum score and sorts.
    pub fn from_unnormalized(raw: &[f64], diagnostics: Diagnostics) -> Result<Self> {
        let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > 0.0 && max.is_finite()) {
            return Err(RankError::Solver {
                iteration: diagnostics.iterations,
                reason: format!("cannot max-normalize scores with maximum {max}"),
            });
        }
        let scores: Vec<f64> = raw.iter().map(|s| s / max).collect();
        Ok(RankingResult {
            order: descending_order(&scores),
            scores,
            diagnostics,
        })
    }

    /// Zero-based rank position of every item.
    pub fn positions(&self) -> Vec<usize> {
        positions(&self.order)
    }
}

/// Item indices sorted by descending score; ties go to the lower index.
pub fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Inverse of an ordering: `positions(order)[item]` is the item's rank.
pub fn positions(order: &[usize]) -> Vec<usize> {
    let mut pos = vec![0; order.len()];
    for (rank, &item) in order.iter().enumerate() {
        pos[item] = rank;
    }
    pos
}

fn check_permutations(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(RankError::domain(format!(
            "orderings differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    for order in [a, b] {
        let mut seen = vec![false; order.len()];
        for &i in order {
            if i >= order.len() || std::mem::replace(&mut seen[i], true) {
                return Err(RankError::domain("ordering is not a permutation"));
            }
        }
    }
    Ok(())
}

/// Absolute rank displacement of every item between two orderings.
pub fn position_errors(estimated_order: &[usize], reference_order: &[usize]) -> Result<Vec<usize>> {
    check_permutations(estimated_order, reference_order)?;
    let (pe, pr) = (positions(estimated_order), positions(reference_order));
    Ok(pe.iter().zip(&pr).map(|(a, b)| a.abs_diff(*b)).collect())
}

/// Root mean square rank displacement.
pub fn rank_rmse(estimated_order: &[usize], reference_order: &[usize]) -> Result<f64> {
    let errors = position_errors(estimated_order, reference_order)?;
    if errors.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = errors.iter().map(|&d| (d * d) as f64).sum();
    Ok((sq / errors.len() as f64).sqrt())
}

/// Number of discordant item pairs.
pub fn kendall_tau_distance(order_a: &[usize], order_b: &[usize]) -> Result<usize> {
    check_permutations(order_a, order_b)?;
    let (pa, pb) = (positions(order_a), positions(order_b));
    let n = pa.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 1..n {
            if (pa[i] < pa[j]) != (pb[i] < pb[j]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Empirical `q`-quantile, nearest-rank definition.
pub fn rank_error_quantile(errors: &[f64], q: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(RankError::domain("quantile of an empty collection"));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(RankError::domain(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against q * n landing a hair above an integer
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// One played match, as seen by the prediction scorer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchResult<T> {
    Decisive { winner: T, loser: T },
    Tie(T, T),
}

fn position_map<T: Eq + Hash>(ranking: &[T]) -> HashMap<&T, usize> {
    ranking.iter().enumerate().map(|(pos, t)| (t, pos)).collect()
}

/// Points earned by two rankings at predicting `matches`.
///
/// A decisive match gives a point to every ranking that places the winner
/// above the loser. A tie gives half a point to the ranking that places the
/// two sides closer together, or half a point to each when the distances match.
/// Rankings are listed best first.
pub fn prediction_score<T: Eq + Hash + std::fmt::Debug>(
    rank_a: &[T],
    rank_b: &[T],
    matches: &[MatchResult<T>],
) -> Result<(f64, f64)> {
    let (pa, pb) = (position_map(rank_a), position_map(rank_b));
    let lookup = |map: &HashMap<&T, usize>, team: &T| {
        map.get(team)
            .copied()
            .ok_or_else(|| RankError::domain(format!("team {team:?} missing from a ranking")))
    };
    let (mut score_a, mut score_b) = (0.0, 0.0);
    for m in matches {
        match m {
            MatchResult::Decisive { winner, loser } => {
                if lookup(&pa, winner)? < lookup(&pa, loser)? {
                    score_a += 1.0;
                }
                if lookup(&pb, winner)? < lookup(&pb, loser)? {
                    score_b += 1.0;
                }
            }
            MatchResult::Tie(x, y) => {
                let da = lookup(&pa, x)?.abs_diff(lookup(&pa, y)?);
                let db = lookup(&pb, x)?.abs_diff(lookup(&pb, y)?);
                match da.cmp(&db) {
                    std::cmp::Ordering::Less => score_a += 0.5,
                    std::cmp::Ordering::Greater => score_b += 0.5,
                    std::cmp::Ordering::Equal => {
                        score_a += 0.5;
                        score_b += 0.5;
                    }
                }
            }
        }
    }
    Ok((score_a, score_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rank_rmse(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0.0);
        assert!((rank_rmse(&[1, 0, 2], &[0, 1, 2]).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(rank_rmse(&[1, 0], &[0, 1]).unwrap(), 1.0);
        assert!(rank_rmse(&[0, 1], &[0, 1, 2]).is_err());
        assert!(rank_rmse(&[0, 0], &[0, 1]).is_err());
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(rank_error_quantile(&[0.0; 7], 0.95).unwrap(), 0.0);
        let grid: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(rank_error_quantile(&grid, 0.95).unwrap(), 95.0);
        assert_eq!(rank_error_quantile(&grid, 0.5).unwrap(), 50.0);
        assert!(rank_error_quantile(&[], 0.5).is_err());
        assert!(rank_error_quantile(&[1.0], 1.0).is_err());
    }

    #[test]
    fn quantile_matches_sort_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::substream(3, &[]);
        let sample: Vec<f64> = (0..321).map(|_| rng.random::<f64>() * 4.0).collect();
        let mut sorted = sample.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // nearest rank: smallest value with at least 95% of the sample at or below it
        let oracle = *sorted
            .iter()
            .find(|&&v| sorted.iter().filter(|&&s| s <= v).count() as f64 >= 0.95 * 321.0)
            .unwrap();
        assert_eq!(rank_error_quantile(&sample, 0.95).unwrap(), oracle);
    }

    #[test]
    fn ordering_breaks_ties_by_index() {
        assert_eq!(descending_order(&[0.5, 1.0, 0.5, 0.2]), vec![1, 0, 2, 3]);
    }

    #[test]
    fn decisive_scoring() {
        let a = ["x", "y"];
        let b = ["y", "x"];
        let m = [MatchResult::Decisive { winner: "x", loser: "y" }];
        assert_eq!(prediction_score(&a, &b, &m).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn tie_scoring() {
        let a = ["p", "q", "r", "s", "t", "u"];
        let b = ["p", "r", "s", "t", "u", "q"];
        // a: p..r two apart; b: p..q five apart
        let m = [MatchResult::Tie("p", "r")];
        assert_eq!(prediction_score(&a, &b, &m).unwrap(), (0.0, 0.5));
        let m = [MatchResult::Tie("p", "q")];
        assert_eq!(prediction_score(&a, &b, &m).unwrap(), (0.5, 0.0));
        let m = [MatchResult::Tie("p", "p")];
        assert_eq!(prediction_score(&a, &a, &m).unwrap(), (0.5, 0.5));
        let m = [MatchResult::Tie("p", "zz")];
        assert!(prediction_score(&a, &b, &m).is_err());
    }

    #[test]
    fn kendall_basic() {
        assert_eq!(kendall_tau_distance(&[0, 1, 2], &[0, 1, 2]).unwrap(), 0);
        assert_eq!(kendall_tau_distance(&[2, 1, 0], &[0, 1, 2]).unwrap(), 3);
    }

    fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
        Just((0..n).collect::<Vec<_>>()).prop_shuffle()
    }

    proptest! {
        #[test]
        fn rmse_is_symmetric_and_satisfies_triangle(
            (a, b, c) in (2usize..12).prop_flat_map(|n| (permutation(n), permutation(n), permutation(n)))
        ) {
            let ab = rank_rmse(&a, &b).unwrap();
            prop_assert!((ab - rank_rmse(&b, &a).unwrap()).abs() < 1e-12);
            let ac = rank_rmse(&a, &c).unwrap();
            let cb = rank_rmse(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-12);
        }

        #[test]
        fn tie_points_total_half_or_one(
            (a, b, x, y) in (2usize..10).prop_flat_map(|n| (permutation(n), permutation(n), 0..n, 0..n))
        ) {
            let (sa, sb) = prediction_score(&a, &b, &[MatchResult::Tie(x, y)]).unwrap();
            prop_assert!(sa + sb == 0.5 || sa + sb == 1.0);
            let (sa, sb) = prediction_score(&a, &b, &[MatchResult::Decisive { winner: x, loser: y }]).unwrap();
            prop_assert!((0.0..=2.0).contains(&(sa + sb)));
        }
    }
}
