//! Rank Centrality: stationary distribution of a comparison random walk.

use crate::error::{RankError, Result};
use crate::metrics::{descending_order, Diagnostics, RankingResult};
use crate::model::{EdgeSet, ObservationMatrix};

const STATIONARY_TOL: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryScores {
    pub pi: Vec<f64>,
    pub iterations: usize,
    /// L1 change of the last power step.
    pub residual: f64,
}

impl StationaryScores {
    pub fn order(&self) -> Vec<usize> {
        descending_order(&self.pi)
    }

    pub fn into_ranking(self) -> Result<RankingResult> {
        RankingResult::from_unnormalized(
            &self.pi,
            Diagnostics {
                iterations: self.iterations,
                residual: self.residual,
                ..Diagnostics::default()
            },
        )
    }
}

/// Walk that moves from `i` to `j` with probability `y[j][i] / d_max` and stays otherwise.
pub fn rank_centrality(y: &ObservationMatrix, e: &EdgeSet) -> Result<StationaryScores> {
    let n = e.n();
    if y.n() != n {
        return Err(RankError::domain("observation matrix does not match the edge set"));
    }
    if n == 0 {
        return Err(RankError::domain("no items"));
    }
    let components = e.components();
    if components.len() > 1 {
        return Err(RankError::Disconnected { components });
    }
    let d_max = e.max_degree().max(1) as f64;
    // sparse transitions i -> j and the self-loop mass
    let out: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| e.neighbors(i).map(|j| (j, y.get(j, i) / d_max)).collect())
        .collect();
    let stay: Vec<f64> = out
        .iter()
        .map(|row| 1.0 - row.iter().map(|&(_, p)| p).sum::<f64>())
        .collect();

    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS && residual >= STATIONARY_TOL {
        for (k, slot) in next.iter_mut().enumerate() {
            *slot = pi[k] * stay[k];
        }
        for (i, row) in out.iter().enumerate() {
            for &(j, p) in row {
                next[j] += pi[i] * p;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pi, &mut next);
        iterations += 1;
    }
    Ok(StationaryScores { pi, iterations, residual })
}
