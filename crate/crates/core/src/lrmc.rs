//! Noiseless rank-1 completion by alternating least squares.

use crate::error::{RankError, Result};
use crate::harness::min_pobs_bound;
use crate::metrics::{Diagnostics, RankingResult};
use crate::model::{EdgeSet, ObservationMatrix};
use crate::par::{map_indexed_above, ITEM_PAR_THRESHOLD};
use crate::ratio::{build_ratio_matrix, RatioMatrix};
use crate::spectral::{init_factor, FactorVector, InitMode};

pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LrmcConfig {
    pub r_max: f64,
    pub delta_w_min: f64,
    pub p_obs: f64,
    pub spectral_tol: f64,
}

impl LrmcConfig {
    pub fn new(r_max: f64, delta_w_min: f64, p_obs: f64) -> Result<Self> {
        if !(r_max >= 1.0) {
            return Err(RankError::domain(format!("r_max must be >= 1, got {r_max}")));
        }
        if !(delta_w_min > 0.0) {
            return Err(RankError::domain("delta_w_min must be positive"));
        }
        if !(p_obs > 0.0 && p_obs <= 1.0) {
            return Err(RankError::domain(format!("p_obs must lie in (0, 1], got {p_obs}")));
        }
        Ok(LrmcConfig {
            r_max,
            delta_w_min,
            p_obs,
            spectral_tol: DEFAULT_SPECTRAL_TOL,
        })
    }
}

/// `round(4 ln(n / (2 dw)) / ln 16)`, at least 1.
pub fn iteration_budget(n: usize, delta_w_min: f64) -> Result<usize> {
    if n < 2 {
        return Err(RankError::domain(format!("need at least 2 items, got {n}")));
    }
    if !(delta_w_min > 0.0 && delta_w_min < n as f64 / 2.0) {
        return Err(RankError::domain(format!(
            "delta_w_min must lie in (0, n/2), got {delta_w_min}"
        )));
    }
    let t = (4.0 * (n as f64 / (2.0 * delta_w_min)).ln() / 16f64.ln()).round();
    Ok((t as usize).max(1))
}

/// One least-squares half-step. `by_column` solves for `V` given `U`
/// (column `s` fitted against `M[., s]`), otherwise for `U` given `V`.
/// Entries without usable observations keep `previous`; their indices are returned.
fn ls_half_step(m: &RatioMatrix, fixed: &[f64], previous: Option<&[f64]>, by_column: bool) -> (Vec<f64>, Vec<usize>) {
    let n = m.n();
    let solved = map_indexed_above(n, ITEM_PAR_THRESHOLD, |s| {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..n {
            let (row, col) = if by_column { (k, s) } else { (s, k) };
            if m.is_observed(row, col) {
                num += m.get(row, col) * fixed[k];
                den += fixed[k] * fixed[k];
            }
        }
        (den > 0.0).then(|| num / den)
    });
    let mut degenerate = Vec::new();
    let values = solved
        .into_iter()
        .enumerate()
        .map(|(s, v)| {
            v.unwrap_or_else(|| {
                degenerate.push(s);
                previous.map_or(f64::NAN, |p| p[s])
            })
        })
        .collect();
    (values, degenerate)
}

/// Least-squares `V` for fixed `U`: `V_s = sum M_is U_i / sum U_i^2` over observed `(i, s)`.
pub fn ls_update_v(m: &RatioMatrix, u: &FactorVector) -> Result<FactorVector> {
    let (v, bad) = ls_half_step(m, &u.values, None, true);
    match bad.first() {
        Some(&s) => Err(RankError::Degenerate { axis: "column", index: s, iteration: 0 }),
        None => Ok(FactorVector::v(v)),
    }
}

/// Least-squares `U` for fixed `V`: `U_q = sum M_qj V_j / sum V_j^2` over observed `(q, j)`.
pub fn ls_update_u(m: &RatioMatrix, v: &FactorVector) -> Result<FactorVector> {
    let (u, bad) = ls_half_step(m, &v.values, None, false);
    match bad.first() {
        Some(&q) => Err(RankError::Degenerate { axis: "row", index: q, iteration: 0 }),
        None => Ok(FactorVector::u(u)),
    }
}

/// `||P_E(U V^T) - P_E(M)||_F^2`, diagonal included.
pub fn observed_objective(m: &RatioMatrix, u: &[f64], v: &[f64]) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for i in 0..n {
        let (row, mask) = (m.row(i), m.mask_row(i));
        for j in 0..n {
            if mask[j] {
                let r = u[i] * v[j] - row[j];
                total += r * r;
            }
        }
    }
    total
}

/// Ranks items from strictly positive observations with the noiseless solver.
pub fn rank_lrmc(y: &ObservationMatrix, e: &EdgeSet, cfg: &LrmcConfig) -> Result<RankingResult> {
    rank_lrmc_traced(y, e, cfg).map(|(r, _)| r)
}

/// As [`rank_lrmc`], also returning the observed objective after every half-step.
pub fn rank_lrmc_traced(y: &ObservationMatrix, e: &EdgeSet, cfg: &LrmcConfig) -> Result<(RankingResult, Vec<f64>)> {
    let m = build_ratio_matrix(y, e)?;
    let n = m.n();
    let budget = iteration_budget(n, cfg.delta_w_min)?;
    let init = init_factor(&m, cfg.p_obs, cfg.r_max, 1.0, InitMode::Noiseless, cfg.spectral_tol)?;
    let mut u = init.factor.values;
    let mut v = vec![1.0; n];
    let mut trace = Vec::with_capacity(2 * budget);
    let mut degenerate_updates = 0;
    for t in 1..=budget {
        let (next_v, bad) = ls_half_step(&m, &u, Some(&v), true);
        degenerate_updates += bad.len();
        v = next_v;
        trace.push(observed_objective(&m, &u, &v));
        let (next_u, bad) = ls_half_step(&m, &v, Some(&u), false);
        degenerate_updates += bad.len();
        u = next_u;
        trace.push(observed_objective(&m, &u, &v));
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(RankError::Solver {
                iteration: t,
                reason: "non-finite factor entry".into(),
            });
        }
    }
    let diagnostics = Diagnostics {
        iterations: budget,
        residual: trace.last().copied().unwrap_or(0.0).sqrt(),
        rmax_used: Some(cfg.r_max),
        sign_fixed: init.sign_flipped,
        degenerate_init: init.degenerate,
        degenerate_updates,
        min_pobs_bound: Some(min_pobs_bound(1.0, cfg.r_max, n, cfg.delta_w_min, 1.0 / 12.0).value),
    };
    Ok((RankingResult::from_unnormalized(&u, diagnostics)?, trace))
}
