//! Spectral initialization of the score factor.
//!
//! The starting factor is the dominant left singular vector of the rescaled
//! observed ratio matrix, computed by power iteration on its Gram operator and
//! then clipped, sign-corrected, floored (noisy mode) and normalized.

use crate::error::{RankError, Result};
use crate::ratio::RatioMatrix;

const MAX_POWER_ITERATIONS: usize = 20_000;

/// Which side of the `U V^T` factorization a vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorRole {
    /// Score-like factor, estimates `w` up to scale.
    U,
    /// Inverse-score factor, estimates `1 / w` up to scale.
    V,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorVector {
    pub values: Vec<f64>,
    pub role: FactorRole,
}

impl FactorVector {
    pub fn new(values: Vec<f64>, role: FactorRole) -> Self {
        FactorVector { values, role }
    }

    pub fn u(values: Vec<f64>) -> Self {
        FactorVector::new(values, FactorRole::U)
    }

    pub fn v(values: Vec<f64>) -> Self {
        FactorVector::new(values, FactorRole::V)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.values)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Result of the power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularVector {
    pub factor: FactorVector,
    pub sigma: f64,
    pub iterations: usize,
    /// Set when nothing off the diagonal is observed, so every direction is singular.
    pub degenerate: bool,
}

/// Dominant left singular vector of `P_E(M) / p_obs`, unit norm.
pub fn top_singular_vector(m: &RatioMatrix, p_obs: f64, tol: f64) -> Result<SingularVector> {
    if !(p_obs > 0.0 && p_obs <= 1.0) {
        return Err(RankError::domain(format!("p_obs must lie in (0, 1], got {p_obs}")));
    }
    if !(tol > 0.0) {
        return Err(RankError::domain("power iteration tolerance must be positive"));
    }
    let n = m.n();
    if n == 0 || m.max_entry() == 0.0 {
        return Err(RankError::domain("ratio matrix is zero"));
    }
    let scale = 1.0 / p_obs;
    let mut u = vec![1.0 / (n as f64).sqrt(); n];
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sigma = 0.0;
    let mut iterations = 0;
    while iterations < MAX_POWER_ITERATIONS {
        iterations += 1;
        // x = A^T u
        x.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let (row, mask) = (m.row(i), m.mask_row(i));
            for j in 0..n {
                if mask[j] {
                    x[j] += scale * row[j] * u[i];
                }
            }
        }
        // next = A x
        for i in 0..n {
            let (row, mask) = (m.row(i), m.mask_row(i));
            next[i] = (0..n).filter(|&j| mask[j]).map(|j| scale * row[j] * x[j]).sum();
        }
        let len = norm(&next);
        if len == 0.0 {
            return Err(RankError::domain("ratio matrix annihilates the start vector"));
        }
        sigma = len.sqrt();
        next.iter_mut().for_each(|v| *v /= len);
        let diff = u.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        std::mem::swap(&mut u, &mut next);
        if diff < tol {
            break;
        }
    }
    Ok(SingularVector {
        factor: FactorVector::u(u),
        sigma,
        iterations,
        degenerate: m.is_diagonal_only(),
    })
}

/// `+1` when at least as many entries are positive as negative, else `-1`.
pub fn vec_sign(u: &[f64]) -> f64 {
    let total: i64 = u
        .iter()
        .map(|&x| {
            if x > 0.0 {
                1
            } else if x < 0.0 {
                -1
            } else {
                0
            }
        })
        .sum();
    if total >= 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Clip, fix sign, normalize.
    Noiseless,
    /// Clip, fix sign, scale to `max = 1`, raise entries to `1 / (c_r * r_max)`.
    ///
    /// The noisy solver's bounds (`U <= 1`, the truncation floor and cap) are
    /// stated on the max-normalized score scale, so the start lives there too.
    Noisy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub factor: FactorVector,
    /// Number of entries zeroed by the `2 * r_max` clipping rule.
    pub clipped: usize,
    /// The raw vector had a negative majority and was flipped.
    pub sign_flipped: bool,
    /// Everything was clipped away and the uniform vector was used instead.
    pub degenerate: bool,
}

/// Post-processes a raw singular vector into the starting score factor.
pub fn condition_initial_factor(mut u: Vec<f64>, r_max: f64, c_r: f64, mode: InitMode) -> InitOutcome {
    let n = u.len();
    let limit = 2.0 * r_max;
    let mut clipped = 0;
    for x in u.iter_mut() {
        if x.abs() > limit {
            *x = 0.0;
            clipped += 1;
        }
    }
    if u.iter().all(|&x| x == 0.0) {
        let flat = match mode {
            InitMode::Noiseless => 1.0 / (n as f64).sqrt(),
            InitMode::Noisy => 1.0,
        };
        return InitOutcome {
            factor: FactorVector::u(vec![flat; n]),
            clipped,
            sign_flipped: false,
            degenerate: true,
        };
    }
    let sign = vec_sign(&u);
    if sign < 0.0 {
        u.iter_mut().for_each(|x| *x = -*x);
    }
    match mode {
        InitMode::Noiseless => {
            let len = norm(&u);
            u.iter_mut().for_each(|x| *x /= len);
        }
        InitMode::Noisy => {
            // a non-negative sign majority leaves at least one positive entry
            let max = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let floor = 1.0 / (c_r * r_max);
            u.iter_mut().for_each(|x| *x = (*x / max).max(floor));
        }
    }
    InitOutcome {
        factor: FactorVector::u(u),
        clipped,
        sign_flipped: sign < 0.0,
        degenerate: false,
    }
}

/// Spectral start for either solver.
pub fn init_factor(
    m: &RatioMatrix,
    p_obs: f64,
    r_max: f64,
    c_r: f64,
    mode: InitMode,
    tol: f64,
) -> Result<InitOutcome> {
    if !(r_max >= 1.0) {
        return Err(RankError::domain(format!("r_max must be >= 1, got {r_max}")));
    }
    if mode == InitMode::Noisy && !(c_r >= 1.0) {
        return Err(RankError::domain(format!("c_r must be >= 1, got {c_r}")));
    }
    let sv = top_singular_vector(m, p_obs, tol)?;
    let mut out = condition_initial_factor(sv.factor.values, r_max, c_r, mode);
    out.degenerate |= sv.degenerate;
    Ok(out)
}
