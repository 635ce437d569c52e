//! Noisy ranking by alternating per-item maximum-likelihood factor updates.
//!
//! Each half-step fixes one factor of `M ~ U V^T` and maximizes the binomial
//! likelihood of the observed win counts over the other, one item at a time.
//! With `Z = 1 / V_q` (or `Z = U_q`) the stationarity condition reduces to a
//! strictly monotone scalar equation `f(Z) = S` on `(0, 1]`, solved by a
//! bracketed root finder. Solutions that would leave `(0, 1]` are pinned to 1.

use crate::error::{RankError, Result};
use crate::lrmc::{iteration_budget, DEFAULT_SPECTRAL_TOL};
use crate::metrics::{Diagnostics, RankingResult};
use crate::model::{ComparisonCounts, EdgeSet, ObservationMatrix};
use crate::par::{map_indexed_above, ITEM_PAR_THRESHOLD};
use crate::ratio::{build_ratio_matrix, estimate_rmax, truncate_observations, RatioMatrix};
use crate::root::{RootFinder, RootMethod};
use crate::spectral::{init_factor, FactorVector, InitMode};

#[derive(Debug, Clone, PartialEq)]
pub struct McmleConfig {
    /// Known score ratio; estimated from the observations when `None`.
    pub r_max: Option<f64>,
    /// Relaxation of the truncation cap `c_r * r_max`.
    pub c_r: f64,
    /// Target score resolution; also the inner root tolerance.
    pub delta_w_min: f64,
    /// Stop once successive reconstructions differ by less than this (Frobenius).
    pub delta: f64,
    pub force_consistency: bool,
    pub p_obs: f64,
    pub root_method: RootMethod,
    pub spectral_tol: f64,
}

impl McmleConfig {
    pub fn new(c_r: f64, delta_w_min: f64, delta: f64, p_obs: f64) -> Result<Self> {
        if !(c_r >= 1.0) {
            return Err(RankError::domain(format!("c_r must be >= 1, got {c_r}")));
        }
        if !(delta_w_min > 0.0 && delta > 0.0) {
            return Err(RankError::domain("delta_w_min and delta must be positive"));
        }
        if !(p_obs > 0.0 && p_obs <= 1.0) {
            return Err(RankError::domain(format!("p_obs must lie in (0, 1], got {p_obs}")));
        }
        Ok(McmleConfig {
            r_max: None,
            c_r,
            delta_w_min,
            delta,
            force_consistency: true,
            p_obs,
            root_method: RootMethod::Bisection,
            spectral_tol: DEFAULT_SPECTRAL_TOL,
        })
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = Some(r_max);
        self
    }

    pub fn with_consistency(mut self, on: bool) -> Self {
        self.force_consistency = on;
        self
    }

    pub fn with_root_method(mut self, method: RootMethod) -> Self {
        self.root_method = method;
        self
    }

    fn finder(&self) -> RootFinder {
        RootFinder {
            tol: self.delta_w_min,
            method: self.root_method,
        }
    }
}

/// Per-row comparison weights `W[q][j] = L_qj / max_j L_qj`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl WeightMatrix {
    pub fn from_counts(e: &EdgeSet, counts: &ComparisonCounts) -> Result<Self> {
        if counts.n() != e.n() {
            return Err(RankError::domain("count matrix does not match the edge set"));
        }
        let rows = (0..e.n())
            .map(|q| {
                let entries: Vec<(usize, u32)> = e.neighbors(q).map(|j| (j, counts.get(q, j))).collect();
                if let Some(&(j, _)) = entries.iter().find(|(_, l)| *l == 0) {
                    return Err(RankError::domain(format!("pair ({q}, {j}) is an edge with no comparisons")));
                }
                let max = entries.iter().map(|&(_, l)| l).max().unwrap_or(1) as f64;
                Ok(entries.into_iter().map(|(j, l)| (j, l as f64 / max)).collect())
            })
            .collect::<Result<_>>()?;
        Ok(WeightMatrix { rows })
    }

    /// Observed neighbours of `q` with their weights.
    pub fn row(&self, q: usize) -> &[(usize, f64)] {
        &self.rows[q]
    }

    pub fn get(&self, q: usize, j: usize) -> f64 {
        self.rows[q].iter().find(|&&(k, _)| k == j).map_or(0.0, |&(_, w)| w)
    }
}

fn check_inputs(m: &RatioMatrix, e: &EdgeSet, other: &FactorVector) -> Result<()> {
    if m.n() != e.n() || other.len() != e.n() {
        return Err(RankError::domain("factor, ratio matrix and edge set sizes differ"));
    }
    if let Some(q) = e.isolated().first() {
        return Err(RankError::domain(format!("item {q} has no observed comparisons")));
    }
    if let Some(bad) = other.values.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(RankError::domain(format!("factor entries must be positive, got {bad}")));
    }
    Ok(())
}

fn solve_items<F>(n: usize, solve: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    map_indexed_above(n, ITEM_PAR_THRESHOLD, solve).into_iter().collect()
}

/// Maximum-likelihood `V` given `U`.
///
/// For item `q`, `Z = 1 / V_q` solves
/// `(1/n) sum_j W_qj Z / (Z + U_j) = S_q = (1/n) sum_j W_qj / (1 + M_jq)`,
/// with `Z = 1` whenever `S_q` exceeds the left side's value at `Z = 1`.
pub fn factor_mle_v(
    m: &RatioMatrix,
    e: &EdgeSet,
    u_prev: &FactorVector,
    delta_z: f64,
    counts: &ComparisonCounts,
) -> Result<FactorVector> {
    let w = WeightMatrix::from_counts(e, counts)?;
    factor_mle_v_with(m, e, u_prev, &w, RootFinder::bisection(delta_z))
}

pub fn factor_mle_v_with(
    m: &RatioMatrix,
    e: &EdgeSet,
    u_prev: &FactorVector,
    weights: &WeightMatrix,
    finder: RootFinder,
) -> Result<FactorVector> {
    check_inputs(m, e, u_prev)?;
    let n = e.n();
    let inv_n = 1.0 / n as f64;
    let u = &u_prev.values;
    let v = solve_items(n, |q| {
        let row = weights.row(q);
        let s: f64 = inv_n * row.iter().map(|&(j, wt)| wt / (1.0 + m.get(j, q))).sum::<f64>();
        let f = |z: f64| inv_n * row.iter().map(|&(j, wt)| wt * z / (z + u[j])).sum::<f64>();
        if s > f(1.0) {
            return Ok(1.0);
        }
        let root = finder.solve(|z| f(z) - s, f64::MIN_POSITIVE, 1.0)?;
        Ok(1.0 / root.x)
    })?;
    Ok(FactorVector::v(v))
}

/// Maximum-likelihood `U` given `V`.
///
/// For item `q`, `Z = U_q` solves
/// `(1/n) sum_i W_iq / (1 + Z V_i) = S_q = (1/n) sum_i W_iq / (1 + M_qi)`,
/// with `Z = 1` whenever `S_q` does not exceed the left side's minimum at `Z = 1`.
///
/// `S_q` is built from the observed ratios `M_qi`, the mirror of the `V` side.
/// A variant with the unknown `U_q V_i` in place of `M_qi` would make `S_q`
/// depend on the quantity being solved for and is not used. The weights are
/// normalized per item `q` (`W_iq = L_iq / max_i L_iq`) so that the equation
/// remains the exact stationarity condition of the likelihood.
pub fn factor_mle_u(
    m: &RatioMatrix,
    e: &EdgeSet,
    v_curr: &FactorVector,
    delta_z: f64,
    counts: &ComparisonCounts,
) -> Result<FactorVector> {
    let w = WeightMatrix::from_counts(e, counts)?;
    factor_mle_u_with(m, e, v_curr, &w, RootFinder::bisection(delta_z))
}

pub fn factor_mle_u_with(
    m: &RatioMatrix,
    e: &EdgeSet,
    v_curr: &FactorVector,
    weights: &WeightMatrix,
    finder: RootFinder,
) -> Result<FactorVector> {
    check_inputs(m, e, v_curr)?;
    let n = e.n();
    let inv_n = 1.0 / n as f64;
    let v = &v_curr.values;
    let u = solve_items(n, |q| {
        // counts are symmetric, so row q of W also normalizes column q
        let row = weights.row(q);
        let s: f64 = inv_n * row.iter().map(|&(i, wt)| wt / (1.0 + m.get(q, i))).sum::<f64>();
        let f = |z: f64| inv_n * row.iter().map(|&(i, wt)| wt / (1.0 + z * v[i])).sum::<f64>();
        if s <= f(1.0) {
            return Ok(1.0);
        }
        let root = finder.solve(|z| f(z) - s, f64::MIN_POSITIVE, 1.0)?;
        Ok(root.x)
    })?;
    Ok(FactorVector::u(u))
}

/// Projects onto `U_q V_q = 1` through `R_q = (U_q + 1 / V_q) / 2`.
pub fn force_consistency(u: &FactorVector, v: &FactorVector) -> Result<(FactorVector, FactorVector)> {
    if u.len() != v.len() {
        return Err(RankError::domain("factor lengths differ"));
    }
    if let Some(bad) = v.values.iter().find(|x| !(**x > 0.0)) {
        return Err(RankError::domain(format!("V entries must be positive, got {bad}")));
    }
    let r: Vec<f64> = u.values.iter().zip(&v.values).map(|(a, b)| 0.5 * (a + 1.0 / b)).collect();
    let inv = r.iter().map(|x| 1.0 / x).collect();
    Ok((FactorVector::u(r), FactorVector::v(inv)))
}

/// Raises `U` to at least `1 / (c_r r_max)` and caps `V` at `c_r r_max`.
pub fn truncate_factors(u: &FactorVector, v: &FactorVector, r_max: f64, c_r: f64) -> (FactorVector, FactorVector) {
    let cap = c_r * r_max;
    let floor = 1.0 / cap;
    (
        FactorVector::u(u.values.iter().map(|x| x.max(floor)).collect()),
        FactorVector::v(v.values.iter().map(|x| x.min(cap)).collect()),
    )
}

/// `||a b^T - c d^T||_F`, evaluated entrywise.
fn outer_distance(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let r = a[i] * b[j] - c[i] * d[j];
            total += r * r;
        }
    }
    total.sqrt()
}

fn at_iteration<T>(iteration: usize, r: Result<T>) -> Result<T> {
    r.map_err(|err| RankError::Solver {
        iteration,
        reason: err.to_string(),
    })
}

/// Full noisy pipeline: estimate or take `r_max`, truncate, build `M`,
/// initialize spectrally, then alternate MLE updates until the reconstruction
/// settles or the iteration budget runs out.
pub fn rank_mcmle(
    y: &ObservationMatrix,
    e: &EdgeSet,
    counts: &ComparisonCounts,
    cfg: &McmleConfig,
) -> Result<RankingResult> {
    if e.is_empty() {
        return Err(RankError::domain("no observed comparisons"));
    }
    if y.n() != e.n() || counts.n() != e.n() {
        return Err(RankError::domain("observation, count and edge sizes differ"));
    }
    if let Some(q) = e.isolated().first() {
        return Err(RankError::domain(format!("item {q} has no observed comparisons")));
    }
    let n = e.n();
    let r_max = match cfg.r_max {
        Some(r) => r,
        None => estimate_rmax(y, e, cfg.delta_w_min)?,
    };
    let y_trunc = truncate_observations(y, e, r_max, cfg.c_r)?;
    let m = build_ratio_matrix(&y_trunc, e)?;
    let budget = iteration_budget(n, cfg.delta_w_min)?;
    let weights = WeightMatrix::from_counts(e, counts)?;
    let finder = cfg.finder();

    let init = init_factor(&m, cfg.p_obs, r_max, cfg.c_r, InitMode::Noisy, cfg.spectral_tol)?;
    let mut u = init.factor;
    let mut v = FactorVector::v(u.values.iter().map(|x| 1.0 / x).collect());
    // M^(t) = cur_u cur_v^T, M^(t-1) = prev (None is the zero matrix)
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut t = 1;
    let mut residual = f64::INFINITY;
    while t <= budget {
        residual = match &prev {
            Some((pu, pv)) => outer_distance(&u.values, &v.values, pu, pv),
            None => u.norm() * v.norm(),
        };
        if residual < cfg.delta {
            break;
        }
        prev = Some((u.values.clone(), v.values.clone()));
        let v_next = at_iteration(t, factor_mle_v_with(&m, e, &u, &weights, finder))?;
        let u_next = at_iteration(t, factor_mle_u_with(&m, e, &v_next, &weights, finder))?;
        let (tu, tv) = truncate_factors(&u_next, &v_next, r_max, cfg.c_r);
        (u, v) = if cfg.force_consistency {
            at_iteration(t, force_consistency(&tu, &tv))?
        } else {
            (tu, tv)
        };
        t += 1;
    }
    let diagnostics = Diagnostics {
        iterations: t - 1,
        residual,
        rmax_used: Some(r_max),
        sign_fixed: init.sign_flipped,
        degenerate_init: init.degenerate,
        ..Diagnostics::default()
    };
    RankingResult::from_unnormalized(&u.values, diagnostics)
}
