//! Match records: CSV input, point schemes and aggregation into observations.

use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::Rng;
use serde::Deserialize;

use crate::error::{RankError, Result};
use crate::metrics::MatchResult;
use crate::model::{ComparisonCounts, EdgeSet, ObservationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    /// Side A won.
    A,
    /// Side B won.
    B,
    Tie,
}

impl FromStr for Outcome {
    type Err = RankError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Outcome::A),
            "B" | "b" => Ok(Outcome::B),
            "T" | "t" => Ok(Outcome::Tie),
            other => Err(RankError::domain(format!("unknown outcome {other:?}, expected A, B or T"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchRecord {
    pub date: NaiveDate,
    pub side_a: String,
    pub side_b: String,
    pub outcome: Outcome,
}

impl MatchRecord {
    pub fn as_result(&self) -> MatchResult<String> {
        match self.outcome {
            Outcome::A => MatchResult::Decisive {
                winner: self.side_a.clone(),
                loser: self.side_b.clone(),
            },
            Outcome::B => MatchResult::Decisive {
                winner: self.side_b.clone(),
                loser: self.side_a.clone(),
            },
            Outcome::Tie => MatchResult::Tie(self.side_a.clone(), self.side_b.clone()),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RawRecord {
    date: String,
    side_a: String,
    side_b: String,
    outcome: String,
}

/// Reads `date,side_a,side_b,outcome` rows; dates are `YYYY-MM-DD`.
pub fn read_matches_csv<R: Read>(input: R) -> Result<Vec<MatchRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut out = Vec::new();
    for (k, row) in reader.deserialize::<RawRecord>().enumerate() {
        let line = k + 2;
        let raw = row.map_err(|e| RankError::domain(format!("line {line}: {e}")))?;
        let date = NaiveDate::parse_from_str(&raw.date, "%Y-%m-%d")
            .map_err(|e| RankError::domain(format!("line {line}: bad date {:?}: {e}", raw.date)))?;
        let outcome = raw
            .outcome
            .parse()
            .map_err(|e: RankError| RankError::domain(format!("line {line}: {e}")))?;
        if raw.side_a.is_empty() || raw.side_b.is_empty() {
            return Err(RankError::domain(format!("line {line}: empty side name")));
        }
        if raw.side_a == raw.side_b {
            return Err(RankError::domain(format!("line {line}: {} plays itself", raw.side_a)));
        }
        out.push(MatchRecord {
            date,
            side_a: raw.side_a,
            side_b: raw.side_b,
            outcome,
        });
    }
    Ok(out)
}

/// Points awarded for a win, a tie and a loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScheme {
    pub win: f64,
    pub tie: f64,
    pub lose: f64,
}

impl PointScheme {
    pub const FOOTBALL: PointScheme = PointScheme { win: 3.0, tie: 1.0, lose: 0.0 };
    pub const WEATHER: PointScheme = PointScheme { win: 1.0, tie: 0.5, lose: 0.0 };

    pub fn new(win: f64, tie: f64, lose: f64) -> Result<Self> {
        if !(win > tie && tie >= lose && lose >= 0.0 && win.is_finite()) {
            return Err(RankError::domain(format!(
                "point scheme needs win > tie >= lose >= 0, got {win},{tie},{lose}"
            )));
        }
        Ok(PointScheme { win, tie, lose })
    }
}

impl FromStr for PointScheme {
    type Err = RankError;

    /// `football`, `weather` or `custom:WIN,TIE,LOSE`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "football" => Ok(PointScheme::FOOTBALL),
            "weather" => Ok(PointScheme::WEATHER),
            _ => {
                let body = s
                    .strip_prefix("custom:")
                    .ok_or_else(|| RankError::domain(format!("unknown point scheme {s:?}")))?;
                let parts: Vec<f64> = body
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| RankError::domain(format!("bad point scheme {s:?}: {e}")))?;
                match parts[..] {
                    [w, t, l] => PointScheme::new(w, t, l),
                    _ => Err(RankError::domain(format!("point scheme {s:?} needs three values"))),
                }
            }
        }
    }
}

/// Half-open date range `[start, end)`; open ends are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DateWindow {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl DateWindow {
    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start.is_none_or(|s| d >= s) && self.end.is_none_or(|e| d < e)
    }
}

/// Observations aggregated from a set of matches.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    /// Item names in index order (sorted).
    pub names: Vec<String>,
    pub y: ObservationMatrix,
    pub counts: ComparisonCounts,
    pub e: EdgeSet,
    pub warnings: Vec<String>,
}

impl Aggregated {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }
}

/// Sums points per pair inside the window and sets `y_ij = pts_i / (pts_i + pts_j)`.
///
/// Pairs whose matches earned no points at all are dropped (only possible
/// when every match is a tie under a scheme with zero tie points).
pub fn aggregate_matches(records: &[MatchRecord], scheme: PointScheme, window: DateWindow) -> Result<Aggregated> {
    let kept: Vec<&MatchRecord> = records.iter().filter(|r| window.contains(r.date)).collect();
    let mut names: Vec<String> = kept
        .iter()
        .flat_map(|r| [r.side_a.clone(), r.side_b.clone()])
        .collect();
    names.sort();
    names.dedup();
    if names.len() < 2 {
        return Err(RankError::domain(format!("window holds {} teams, need at least 2", names.len())));
    }
    let index = |name: &str| names.binary_search_by(|x| x.as_str().cmp(name)).expect("name collected");

    // (i, j) with i < j -> (points of i, points of j, matches)
    let mut pairs: BTreeMap<(usize, usize), (f64, f64, u32)> = BTreeMap::new();
    for r in &kept {
        let (a, b) = (index(&r.side_a), index(&r.side_b));
        let (pa, pb) = match r.outcome {
            Outcome::A => (scheme.win, scheme.lose),
            Outcome::B => (scheme.lose, scheme.win),
            Outcome::Tie => (scheme.tie, scheme.tie),
        };
        let (key, pi, pj) = if a < b { ((a, b), pa, pb) } else { ((b, a), pb, pa) };
        let slot = pairs.entry(key).or_insert((0.0, 0.0, 0));
        slot.0 += pi;
        slot.1 += pj;
        slot.2 += 1;
    }

    let mut warnings = Vec::new();
    pairs.retain(|&(i, j), &mut (pi, pj, _)| {
        let keep = pi + pj > 0.0;
        if !keep {
            warnings.push(format!("{} vs {}: no points awarded, pair dropped", names[i], names[j]));
        }
        keep
    });
    // teams left without any usable pair are removed and the rest reindexed
    let mut used = vec![false; names.len()];
    for &(i, j) in pairs.keys() {
        used[i] = true;
        used[j] = true;
    }
    let mut remap = vec![usize::MAX; names.len()];
    let mut kept_names = Vec::new();
    for (k, name) in names.into_iter().enumerate() {
        if used[k] {
            remap[k] = kept_names.len();
            kept_names.push(name);
        } else {
            warnings.push(format!("{name} has no usable comparisons and is not ranked"));
        }
    }
    let n = kept_names.len();
    if n < 2 {
        return Err(RankError::domain("no pair of teams earned any points"));
    }
    let mut y = ObservationMatrix::zeros(n);
    let mut counts = ComparisonCounts::zeros(n);
    let mut e = EdgeSet::empty(n);
    for (&(i, j), &(pi, pj, games)) in &pairs {
        let (i, j) = (remap[i], remap[j]);
        e.insert(i, j)?;
        y.set_pair(i, j, pi / (pi + pj));
        counts.set(i, j, games);
    }
    Ok(Aggregated {
        names: kept_names,
        y,
        counts,
        e,
        warnings,
    })
}

/// Keeps each edge independently with probability `p_obs`.
pub fn obscure_edges<R: Rng + ?Sized>(e: &EdgeSet, p_obs: f64, rng: &mut R) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&p_obs) {
        return Err(RankError::domain(format!("p_obs must lie in [0, 1], got {p_obs}")));
    }
    let mut out = EdgeSet::empty(e.n());
    for &(i, j) in e.pairs() {
        if rng.random::<f64>() < p_obs {
            out.insert(i, j)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn record(d: &str, a: &str, b: &str, o: Outcome) -> MatchRecord {
        MatchRecord {
            date: date(d),
            side_a: a.into(),
            side_b: b.into(),
            outcome: o,
        }
    }

    #[test]
    fn football_points() {
        let ms = [
            record("2020-01-01", "a", "b", Outcome::A),
            record("2020-01-02", "a", "b", Outcome::Tie),
            record("2020-01-03", "b", "a", Outcome::A),
        ];
        let agg = aggregate_matches(&ms, PointScheme::FOOTBALL, DateWindow::default()).unwrap();
        // a: 3 + 1 + 0, b: 0 + 1 + 3
        assert_eq!(agg.y.get(0, 1), 0.5);
        assert_eq!(agg.counts.get(0, 1), 3);
        let ms = [record("2020-01-01", "a", "b", Outcome::A), record("2020-01-02", "a", "b", Outcome::Tie)];
        let agg = aggregate_matches(&ms, PointScheme::FOOTBALL, DateWindow::default()).unwrap();
        assert_eq!(agg.y.get(0, 1), 0.8);
        assert!((agg.y.get(1, 0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn two_wins_and_a_tie() {
        let ms = [
            record("2020-01-01", "a", "b", Outcome::A),
            record("2020-01-02", "b", "a", Outcome::B),
            record("2020-01-03", "a", "b", Outcome::Tie),
        ];
        let agg = aggregate_matches(&ms, PointScheme::FOOTBALL, DateWindow::default()).unwrap();
        assert_eq!(agg.y.get(0, 1), 7.0 / 8.0);
        let ms: Vec<_> = (0..4)
            .map(|k| record("2020-01-01", "a", "b", if k < 3 { Outcome::A } else { Outcome::Tie }))
            .collect();
        let agg = aggregate_matches(&ms, PointScheme::WEATHER, DateWindow::default()).unwrap();
        assert_eq!(agg.y.get(0, 1), 0.875);
    }

    #[test]
    fn record_order_does_not_matter() {
        let mut ms = vec![
            record("2020-01-01", "c", "b", Outcome::A),
            record("2020-01-02", "a", "b", Outcome::Tie),
            record("2020-01-03", "b", "a", Outcome::A),
            record("2020-01-04", "a", "c", Outcome::B),
        ];
        let first = aggregate_matches(&ms, PointScheme::FOOTBALL, DateWindow::default()).unwrap();
        ms.reverse();
        assert_eq!(aggregate_matches(&ms, PointScheme::FOOTBALL, DateWindow::default()).unwrap(), first);
    }

    #[test]
    fn weather_points() {
        let ms = [record("2020-01-01", "x", "y", Outcome::B), record("2020-01-02", "x", "y", Outcome::Tie)];
        let agg = aggregate_matches(&ms, PointScheme::WEATHER, DateWindow::default()).unwrap();
        assert_eq!(agg.y.get(0, 1), 0.25);
    }

    #[test]
    fn window_is_half_open() {
        let ms = [
            record("2019-12-31", "a", "b", Outcome::A),
            record("2020-01-01", "a", "c", Outcome::A),
            record("2020-02-01", "b", "c", Outcome::A),
        ];
        let w = DateWindow {
            start: Some(date("2020-01-01")),
            end: Some(date("2020-02-01")),
        };
        let agg = aggregate_matches(&ms, PointScheme::FOOTBALL, w).unwrap();
        assert_eq!(agg.names, vec!["a", "c"]);
        assert_eq!(agg.e.len(), 1);
    }

    #[test]
    fn zero_point_pairs_are_dropped() {
        let ms = [record("2020-01-01", "a", "b", Outcome::Tie), record("2020-01-01", "a", "c", Outcome::A)];
        let agg = aggregate_matches(&ms, PointScheme::new(1.0, 0.0, 0.0).unwrap(), DateWindow::default()).unwrap();
        assert_eq!(agg.names, vec!["a", "c"]);
        assert_eq!(agg.e.len(), 1);
        assert!(agg.warnings.iter().any(|w| w.contains("dropped")));
        assert!(agg.warnings.iter().any(|w| w.starts_with("b ")));
    }

    #[test]
    fn parse_schemes() {
        assert_eq!("football".parse::<PointScheme>().unwrap(), PointScheme::FOOTBALL);
        assert_eq!("custom:2,1,0".parse::<PointScheme>().unwrap(), PointScheme { win: 2.0, tie: 1.0, lose: 0.0 });
        assert!("custom:1,2,0".parse::<PointScheme>().is_err());
        assert!("custom:1,0".parse::<PointScheme>().is_err());
        assert!("chess".parse::<PointScheme>().is_err());
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "date,side_a,side_b,outcome\n2020-01-01,a,b,A\n2020-13-01,a,b,B\n";
        let err = read_matches_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let text = "date,side_a,side_b,outcome\n2020-01-01,a,b,X\n";
        assert!(read_matches_csv(text.as_bytes()).unwrap_err().to_string().contains("line 2"));
        let text = "date,side_a,side_b,outcome\n2020-01-01, a , b ,T\n";
        let rows = read_matches_csv(text.as_bytes()).unwrap();
        assert_eq!(rows[0].side_a, "a");
        assert_eq!(rows[0].outcome, Outcome::Tie);
    }

    #[test]
    fn obscuring_keeps_a_subset() {
        let e = EdgeSet::complete(30);
        let mut rng = crate::rng::substream(9, &[]);
        let sub = obscure_edges(&e, 0.5, &mut rng).unwrap();
        assert!(sub.pairs().iter().all(|&(i, j)| e.contains(i, j)));
        let frac = sub.len() as f64 / e.len() as f64;
        assert!((frac - 0.5).abs() < 0.1);
        assert_eq!(obscure_edges(&e, 1.0, &mut rng).unwrap(), e);
        assert!(obscure_edges(&e, 0.0, &mut rng).unwrap().is_empty());
    }
}
