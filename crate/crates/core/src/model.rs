//! Domain types for items, preference scores, comparison graphs and the
//! Bradley-Terry-Luce simulator.

use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{RankError, Result};
use crate::rng::substream;

/// Dense row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(n: usize, value: T) -> Self {
        Grid {
            n,
            data: vec![value; n * n],
        }
    }
}

impl<T> Grid<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

/// Latent preference scores, normalized so the largest equals 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceVector {
    scores: Vec<f64>,
}

impl PreferenceVector {
    /// Validates positivity and rescales so that `max = 1`.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.is_empty() {
            return Err(RankError::domain("preference vector must be non-empty"));
        }
        if let Some(bad) = scores.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(RankError::domain(format!(
                "preference scores must be finite and positive, got {bad}"
            )));
        }
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        Ok(PreferenceVector {
            scores: scores.into_iter().map(|s| s / max).collect(),
        })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Ratio of the strongest to the weakest score.
    pub fn r_max(&self) -> f64 {
        let (lo, hi) = self
            .scores
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &s| (lo.min(s), hi.max(s)));
        hi / lo
    }

    /// Items by descending score, ties broken by ascending index.
    pub fn order(&self) -> Vec<usize> {
        crate::metrics::descending_order(&self.scores)
    }

    /// Relabels items so that new item `k` is old item `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        PreferenceVector {
            scores: perm.iter().map(|&p| self.scores[p]).collect(),
        }
    }
}

/// Undirected comparison graph without self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSet {
    n: usize,
    mask: Grid<bool>,
    edges: Vec<(usize, usize)>,
}

impl EdgeSet {
    pub fn empty(n: usize) -> Self {
        EdgeSet {
            n,
            mask: Grid::filled(n, false),
            edges: Vec::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut e = EdgeSet::empty(n);
        for i in 0..n {
            for j in i + 1..n {
                e.push_unchecked(i, j);
            }
        }
        e
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut e = EdgeSet::empty(n);
        for (i, j) in pairs {
            e.insert(i, j)?;
        }
        Ok(e)
    }

    /// Adds `{i, j}`. Re-inserting an existing pair is a no-op.
    pub fn insert(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(RankError::domain(format!("self-pair ({i}, {i}) is not allowed")));
        }
        if i >= self.n || j >= self.n {
            return Err(RankError::domain(format!(
                "pair ({i}, {j}) out of range for {} items",
                self.n
            )));
        }
        if !self.mask[(i, j)] {
            self.push_unchecked(i.min(j), i.max(j));
        }
        Ok(())
    }

    fn push_unchecked(&mut self, i: usize, j: usize) {
        self.mask[(i, j)] = true;
        self.mask[(j, i)] = true;
        self.edges.push((i, j));
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Pairs as `(i, j)` with `i < j`, in insertion order.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.mask
            .row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &on)| on.then_some(j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.mask.row(i).iter().filter(|&&on| on).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Items that take part in no comparison.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.n).filter(|&i| self.degree(i) == 0).collect()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut label = vec![usize::MAX; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut stack = vec![start];
            let mut members = Vec::new();
            label[start] = id;
            while let Some(v) = stack.pop() {
                members.push(v);
                for w in self.neighbors(v) {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut e = EdgeSet::empty(self.n);
        for &(i, j) in &self.edges {
            let (a, b) = (inv[i], inv[j]);
            e.push_unchecked(a.min(b), a.max(b));
        }
        e
    }
}

/// Number of comparisons `L_ij` per pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonCounts {
    counts: Grid<u32>,
}

impl ComparisonCounts {
    pub fn zeros(n: usize) -> Self {
        ComparisonCounts {
            counts: Grid::filled(n, 0),
        }
    }

    /// Every edge gets `l` comparisons.
    pub fn uniform(e: &EdgeSet, l: u32) -> Self {
        let mut c = ComparisonCounts::zeros(e.n());
        for &(i, j) in e.pairs() {
            c.set(i, j, l);
        }
        c
    }

    pub fn set(&mut self, i: usize, j: usize, l: u32) {
        self.counts[(i, j)] = l;
        self.counts[(j, i)] = l;
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[(i, j)]
    }

    pub fn n(&self) -> usize {
        self.counts.n()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        self.counts.row(i)
    }
}

/// Empirical win fractions `y[i][j]`: share of the `(i, j)` comparisons won by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    y: Grid<f64>,
}

impl ObservationMatrix {
    pub fn zeros(n: usize) -> Self {
        ObservationMatrix {
            y: Grid::filled(n, 0.0),
        }
    }

    pub fn n(&self) -> usize {
        self.y.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.y[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.y[(i, j)] = value;
    }

    /// Sets `y[i][j] = value` and `y[j][i] = 1 - value`.
    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) {
        self.y[(i, j)] = value;
        self.y[(j, i)] = 1.0 - value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.y.row(i)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        let mut out = ObservationMatrix::zeros(n);
        for a in 0..n {
            for b in 0..n {
                out.y[(a, b)] = self.y[(perm[a], perm[b])];
            }
        }
        out
    }
}

/// Probability that an item of weight `w_i` beats one of weight `w_j`.
pub fn win_probability(w_i: f64, w_j: f64) -> Result<f64> {
    if !(w_i > 0.0 && w_j > 0.0 && w_i.is_finite() && w_j.is_finite()) {
        return Err(RankError::domain(format!(
            "weights must be positive and finite, got ({w_i}, {w_j})"
        )));
    }
    Ok(w_i / (w_i + w_j))
}

/// Erdős–Rényi `G(n, p_obs)` comparison graph.
pub fn sample_erdos_renyi<R: Rng + ?Sized>(n: usize, p_obs: f64, rng: &mut R) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&p_obs) {
        return Err(RankError::domain(format!("p_obs must lie in [0, 1], got {p_obs}")));
    }
    if n < 2 {
        return Err(RankError::domain(format!("need at least 2 items, got {n}")));
    }
    let mut e = EdgeSet::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_obs) {
                e.push_unchecked(i, j);
            }
        }
    }
    Ok(e)
}

/// Noise-free observations: `y[i][j] = p_{i/j}` on every edge.
pub fn exact_observations(w: &PreferenceVector, e: &EdgeSet) -> Result<ObservationMatrix> {
    check_dims(w, e)?;
    let s = w.scores();
    let mut y = ObservationMatrix::zeros(e.n());
    for &(i, j) in e.pairs() {
        y.set(i, j, win_probability(s[i], s[j])?);
        y.set(j, i, win_probability(s[j], s[i])?);
    }
    Ok(y)
}

/// Draws `l` BTL outcomes on every edge of `e`.
///
/// Edge `{i, j}` uses the substream keyed by `(seed, i, j)`, so the result does
/// not depend on the edge iteration order.
pub fn simulate_btl(
    w: &PreferenceVector,
    e: &EdgeSet,
    l: u32,
    seed: u64,
) -> Result<(ObservationMatrix, ComparisonCounts)> {
    let keys: Vec<u64> = (0..e.n() as u64).collect();
    simulate_btl_keyed(w, e, l, seed, &keys)
}

/// As [`simulate_btl`], but the stream for edge `{i, j}` is keyed by the stable
/// labels `keys[i]` and `keys[j]` instead of the positional indices. Simulating
/// a relabeled problem with correspondingly permuted keys reproduces the
/// relabeled observations exactly.
pub fn simulate_btl_keyed(
    w: &PreferenceVector,
    e: &EdgeSet,
    l: u32,
    seed: u64,
    keys: &[u64],
) -> Result<(ObservationMatrix, ComparisonCounts)> {
    check_dims(w, e)?;
    if l == 0 {
        return Err(RankError::domain("need at least one comparison per pair"));
    }
    if keys.len() != e.n() {
        return Err(RankError::domain("one stream key per item required"));
    }
    let s = w.scores();
    let mut y = ObservationMatrix::zeros(e.n());
    for &(a, b) in e.pairs() {
        // orient by key so the draw sequence is label-dependent only
        let (i, j) = if keys[a] <= keys[b] { (a, b) } else { (b, a) };
        let p = win_probability(s[i], s[j])?;
        let mut rng = substream(seed, &[keys[i], keys[j]]);
        let wins = (0..l).filter(|_| rng.random::<f64>() < p).count();
        y.set_pair(i, j, wins as f64 / l as f64);
    }
    Ok((y, ComparisonCounts::uniform(e, l)))
}

fn check_dims(w: &PreferenceVector, e: &EdgeSet) -> Result<()> {
    if w.len() != e.n() {
        return Err(RankError::domain(format!(
            "dimension mismatch: {} scores for {} items",
            w.len(),
            e.n()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn win_probability_examples() {
        assert_eq!(win_probability(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(win_probability(3.0, 1.0).unwrap(), 0.75);
        assert_eq!(win_probability(1.0, 3.0).unwrap(), 0.25);
        assert!(win_probability(0.0, 1.0).is_err());
        assert!(win_probability(1.0, -2.0).is_err());
    }

    #[test]
    fn win_probability_is_monotone() {
        let grid = [0.1, 0.3, 0.7, 1.0, 2.5];
        for w in grid.windows(2) {
            for &other in &grid {
                assert!(win_probability(w[1], other).unwrap() > win_probability(w[0], other).unwrap());
                assert!(win_probability(other, w[1]).unwrap() < win_probability(other, w[0]).unwrap());
            }
        }
    }

    #[test]
    fn erdos_renyi_certainty_cases() {
        let mut rng = substream(1, &[]);
        assert_eq!(sample_erdos_renyi(5, 1.0, &mut rng).unwrap().len(), 10);
        assert!(sample_erdos_renyi(5, 0.0, &mut rng).unwrap().is_empty());
        assert!(sample_erdos_renyi(5, 1.5, &mut rng).is_err());
        assert!(sample_erdos_renyi(1, 0.5, &mut rng).is_err());
    }

    #[test]
    fn erdos_renyi_edge_count_is_binomial() {
        let pairs = 200.0 * 199.0 / 2.0;
        let mean = 0.3 * pairs;
        let sd = (pairs * 0.3 * 0.7_f64).sqrt();
        for seed in 0..20 {
            let e = sample_erdos_renyi(200, 0.3, &mut substream(seed, &[9])).unwrap();
            assert!((e.len() as f64 - mean).abs() < 3.0 * sd, "seed {seed}: {}", e.len());
        }
    }

    #[test]
    fn edge_set_rejects_self_pairs_and_is_symmetric() {
        let mut e = EdgeSet::empty(3);
        assert!(e.insert(1, 1).is_err());
        e.insert(2, 0).unwrap();
        e.insert(0, 2).unwrap();
        assert_eq!(e.pairs(), &[(0, 2)]);
        assert!(e.contains(0, 2) && e.contains(2, 0));
        assert_eq!(e.components(), vec![vec![0, 2], vec![1]]);
    }

    #[test]
    fn single_comparison_is_binary() {
        let w = PreferenceVector::new(vec![1.0, 1.0]).unwrap();
        let e = EdgeSet::complete(2);
        for seed in 0..10 {
            let (y, c) = simulate_btl(&w, &e, 1, seed).unwrap();
            assert!(y.get(0, 1) == 0.0 || y.get(0, 1) == 1.0);
            assert_eq!(y.get(0, 1) + y.get(1, 0), 1.0);
            assert_eq!(c.get(0, 1), 1);
            assert_eq!(c.get(0, 0), 0);
        }
    }

    #[test]
    fn large_l_concentrates() {
        let e = EdgeSet::complete(2);
        for (scores, p) in [(vec![1.0, 1.0], 0.5), (vec![3.0, 1.0], 0.75)] {
            let w = PreferenceVector::new(scores).unwrap();
            let (y, _) = simulate_btl(&w, &e, 100_000, 42).unwrap();
            assert!((y.get(0, 1) - p).abs() < 0.01);
        }
    }

    #[test]
    fn simulate_rejects_mismatch() {
        let w = PreferenceVector::new(vec![1.0, 0.5, 0.2]).unwrap();
        assert!(simulate_btl(&w, &EdgeSet::complete(2), 3, 0).is_err());
        assert!(simulate_btl(&w, &EdgeSet::complete(3), 0, 0).is_err());
    }

    #[test]
    fn preference_vector_normalizes() {
        let w = PreferenceVector::new(vec![2.0, 1.0, 0.5]).unwrap();
        assert_eq!(w.scores(), &[1.0, 0.5, 0.25]);
        assert_eq!(w.r_max(), 4.0);
        assert!(PreferenceVector::new(vec![1.0, 0.0]).is_err());
    }
}
