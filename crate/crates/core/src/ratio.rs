//! Ratio matrix construction and R_max estimation.

use crate::error::{RankError, Result};
use crate::model::{EdgeSet, Grid, ObservationMatrix};
use crate::root::RootFinder;

const E_HAT_FLOOR: f64 = 1e-6;
const E_HAT_CEIL: f64 = 0.5 - 1e-9;
const Z_FLOOR: f64 = 1e-12;

/// Observed win-odds ratios `M[i][j] ~ w_i / w_j`, with the diagonal fixed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    m: Grid<f64>,
    mask: Grid<bool>,
}

impl RatioMatrix {
    /// Builds a matrix from explicit entries. Entries off `e` are ignored and the
    /// diagonal is forced to 1.
    pub fn from_entries(e: &EdgeSet, entry: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let n = e.n();
        let mut m = Grid::filled(n, 0.0);
        let mut mask = Grid::filled(n, false);
        for i in 0..n {
            m[(i, i)] = 1.0;
            mask[(i, i)] = true;
        }
        for &(i, j) in e.pairs() {
            for (a, b) in [(i, j), (j, i)] {
                let v = entry(a, b);
                if !(v.is_finite() && v >= 0.0) {
                    return Err(RankError::domain(format!(
                        "ratio entry ({a}, {b}) must be finite and non-negative, got {v}"
                    )));
                }
                m[(a, b)] = v;
                mask[(a, b)] = true;
            }
        }
        Ok(RatioMatrix { m, mask })
    }

    pub fn n(&self) -> usize {
        self.m.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Whether `(i, j)` is observed. The diagonal always is.
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.m.row(i)
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        self.mask.row(i)
    }

    /// True when nothing off the diagonal is observed.
    pub fn is_diagonal_only(&self) -> bool {
        let n = self.n();
        (0..n).all(|i| (0..n).all(|j| i == j || !self.mask[(i, j)]))
    }

    /// Largest entry.
    pub fn max_entry(&self) -> f64 {
        self.m.as_slice().iter().cloned().fold(0.0, f64::max)
    }
}

/// Lowest admissible win fraction, `1 / (1 + c_r * r_max_hat)`.
pub fn truncation_floor(r_max_hat: f64, c_r: f64) -> Result<f64> {
    if !(r_max_hat >= 1.0 && r_max_hat.is_finite()) {
        return Err(RankError::domain(format!("r_max must be >= 1, got {r_max_hat}")));
    }
    if !(c_r >= 1.0 && c_r.is_finite()) {
        return Err(RankError::domain(format!("c_r must be >= 1, got {c_r}")));
    }
    Ok(1.0 / (1.0 + c_r * r_max_hat))
}

/// Raises every observed win fraction below the floor to the floor.
///
/// Applied entrywise, so `y[i][j] + y[j][i]` may exceed 1 afterwards.
pub fn truncate_observations(
    y: &ObservationMatrix,
    e: &EdgeSet,
    r_max_hat: f64,
    c_r: f64,
) -> Result<ObservationMatrix> {
    check_dims(y, e)?;
    let floor = truncation_floor(r_max_hat, c_r)?;
    let mut out = y.clone();
    for &(i, j) in e.pairs() {
        for (a, b) in [(i, j), (j, i)] {
            if y.get(a, b) < floor {
                out.set(a, b, floor);
            }
        }
    }
    Ok(out)
}

/// `M[i][j] = 1 / y[j][i] - 1` on edges, `M[i][i] = 1`, zero elsewhere.
pub fn build_ratio_matrix(y: &ObservationMatrix, e: &EdgeSet) -> Result<RatioMatrix> {
    check_dims(y, e)?;
    for &(i, j) in e.pairs() {
        for (a, b) in [(i, j), (j, i)] {
            let v = y.get(a, b);
            if !(v > 0.0 && v <= 1.0) {
                return Err(RankError::domain(format!(
                    "observation y[{a}][{b}] = {v} must lie in (0, 1]; truncate first"
                )));
            }
        }
    }
    RatioMatrix::from_entries(e, |i, j| 1.0 / y.get(j, i) - 1.0)
}

/// Mean win fraction of the weakest item against a uniformly drawn opponent,
/// `z / (1 - z) * ln((1 + z) / (2 z))`, as a function of its score `z`.
/// Extended continuously by 1/2 at `z = 1`.
pub fn expected_win_fraction(z: f64) -> f64 {
    if z >= 1.0 {
        return 0.5;
    }
    // ln((1+z)/(2z)) = ln(1 + (1-z)/(2z)); log1p keeps precision near z = 1
    z / (1.0 - z) * ((1.0 - z) / (2.0 * z)).ln_1p()
}

/// Per-item mean observed win fraction, `None` for items without comparisons.
pub fn row_means(y: &ObservationMatrix, e: &EdgeSet) -> Vec<Option<f64>> {
    (0..e.n())
        .map(|i| {
            let (sum, count) = e
                .neighbors(i)
                .fold((0.0, 0usize), |(s, c), j| (s + y.get(i, j), c + 1));
            (count > 0).then(|| sum / count as f64)
        })
        .collect()
}

/// Estimates `max(w) / min(w)` from the weakest item's mean win fraction,
/// assuming scores spread uniformly between the extremes.
pub fn estimate_rmax(y: &ObservationMatrix, e: &EdgeSet, delta_z: f64) -> Result<f64> {
    check_dims(y, e)?;
    let mut e_hat = f64::INFINITY;
    for (i, m) in row_means(y, e).into_iter().enumerate() {
        match m {
            Some(v) => e_hat = e_hat.min(v),
            None => return Err(RankError::domain(format!("item {i} has no observed comparisons"))),
        }
    }
    if e_hat >= E_HAT_CEIL {
        return Ok(1.0);
    }
    let target = e_hat.max(E_HAT_FLOOR);
    let root = RootFinder::bisection(delta_z).solve(|z| expected_win_fraction(z) - target, Z_FLOOR, 1.0)?;
    Ok((1.0 / root.x).max(1.0))
}

fn check_dims(y: &ObservationMatrix, e: &EdgeSet) -> Result<()> {
    if y.n() != e.n() {
        return Err(RankError::domain(format!(
            "dimension mismatch: {n}x{n} observations for {} items",
            e.n(),
            n = y.n()
        )));
    }
    Ok(())
}
