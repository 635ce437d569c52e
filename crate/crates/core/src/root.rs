//! Bracketed scalar root finding for monotone functions.

use crate::error::{RankError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RootMethod {
    /// Fixed-step bisection, finished with one secant step inside the final bracket.
    #[default]
    Bisection,
    /// Brent's method (inverse quadratic interpolation with bisection fallback).
    Brent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Function evaluations spent inside the bracket.
    pub iterations: usize,
}

/// Root finder with an absolute tolerance on the bracket width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootFinder {
    pub tol: f64,
    pub method: RootMethod,
}

/// Halvings needed to shrink a bracket of `width` below `tol`, plus two.
pub fn bisection_cap(width: f64, tol: f64) -> usize {
    ((width / tol).log2().ceil().max(0.0) as usize) + 2
}

impl RootFinder {
    pub fn bisection(tol: f64) -> Self {
        RootFinder {
            tol,
            method: RootMethod::Bisection,
        }
    }

    pub fn brent(tol: f64) -> Self {
        RootFinder {
            tol,
            method: RootMethod::Brent,
        }
    }

    /// Finds the root of `f` in `[lo, hi]`; `f(lo)` and `f(hi)` must not share a sign.
    pub fn solve<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<Root> {
        if !(self.tol > 0.0) {
            return Err(RankError::domain(format!("root tolerance must be positive, got {}", self.tol)));
        }
        if !(lo < hi) {
            return Err(RankError::domain(format!("empty bracket [{lo}, {hi}]")));
        }
        let (flo, fhi) = (f(lo), f(hi));
        if !(flo.is_finite() && fhi.is_finite()) {
            return Err(RankError::domain(format!(
                "non-finite bracket values f({lo}) = {flo}, f({hi}) = {fhi}"
            )));
        }
        if flo == 0.0 {
            return Ok(Root { x: lo, iterations: 0 });
        }
        if fhi == 0.0 {
            return Ok(Root { x: hi, iterations: 0 });
        }
        if flo.signum() == fhi.signum() {
            return Err(RankError::domain(format!(
                "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
            )));
        }
        match self.method {
            RootMethod::Bisection => Ok(bisect(&f, lo, hi, flo, fhi, self.tol)),
            RootMethod::Brent => Ok(brent(&f, lo, hi, flo, fhi, self.tol)),
        }
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, mut flo: f64, mut fhi: f64, tol: f64) -> Root {
    let cap = bisection_cap(hi - lo, tol);
    let mut iterations = 0;
    while hi - lo > tol && iterations < cap {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        iterations += 1;
        if fm == 0.0 {
            return Root { x: mid, iterations };
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let x = if fhi != flo {
        (lo - flo * (hi - lo) / (fhi - flo)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    Root { x, iterations }
}

fn brent<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, flo: f64, fhi: f64, tol: f64) -> Root {
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, flo, fhi);
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    let cap = 4 * bisection_cap(hi - lo, tol);
    let mut iterations = 0;
    while iterations < cap {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            break;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        iterations += 1;
    }
    Root {
        x: b.clamp(lo, hi),
        iterations,
    }
}
