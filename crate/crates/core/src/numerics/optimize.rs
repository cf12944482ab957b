//! Bounded scalar minimisation and bracketed root finding.

use alloc::format;

#[allow(unused_imports)] // inherent methods shadow these when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(invalid(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

pub const SCAN_POINTS: usize = 64;
pub const MIN_TOL: f64 = 1e-14;
const MAX_ITER: usize = 500;
const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Minimises `f` on `domain`: a 64-point scan (endpoints included) locates
/// the best grid cell, then Brent's parabolic/golden-section search refines it.
///
/// Non-finite evaluations are treated as `+inf` during the scan. Returns
/// `(argmin, min)`.
pub fn minimize_scalar<F>(mut f: F, domain: Interval, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    if !(tol >= MIN_TOL) {
        return Err(invalid(format!("tolerance {tol} below {MIN_TOL}")));
    }
    let (lo, hi) = (domain.lo, domain.hi);
    let step = domain.width() / (SCAN_POINTS - 1) as f64;
    let mut grid = [0.0f64; SCAN_POINTS];
    let mut vals = [0.0f64; SCAN_POINTS];
    let mut bad = 0usize;
    let mut best = 0usize;
    for i in 0..SCAN_POINTS {
        let x = if i == SCAN_POINTS - 1 { hi } else { lo + step * i as f64 };
        let v = f(x);
        grid[i] = x;
        vals[i] = if v.is_finite() {
            v
        } else {
            bad += 1;
            f64::INFINITY
        };
        if vals[i] < vals[best] {
            best = i;
        }
    }
    if bad > SCAN_POINTS / 2 {
        return Err(Error::Domain(format!(
            "objective non-finite at {bad} of {SCAN_POINTS} scan points"
        )));
    }

    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(SCAN_POINTS - 1)];
    let (mut x, mut fx) = brent_min(&mut f, a, b, grid[best], vals[best], tol);
    if !(fx <= vals[best]) {
        x = grid[best];
        fx = vals[best];
    }
    Ok((x, fx))
}

/// Brent's `fmin` on `[a, b]` started from a known interior point.
fn brent_min<F>(f: &mut F, mut a: f64, mut b: f64, x0: f64, f0: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let eps = f64::EPSILON.sqrt() * 1e-2;
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (f0, f0, f0);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    for _ in 0..MAX_ITER {
        let xm = 0.5 * (a + b);
        let tol1 = tol / 3.0 + eps * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let mut fu = f(u);
        if !fu.is_finite() {
            fu = f64::INFINITY;
        }
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    (x, fx)
}

/// Brent's root finder on a sign-changing bracket. Stops once `|f| ≤ tol` or
/// the bracket has shrunk to a few ulps.
pub fn find_root<F>(mut f: F, domain: Interval, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(tol > 0.0) {
        return Err(invalid("root tolerance must be positive"));
    }
    let (mut a, mut b) = (domain.lo, domain.hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::NonFinite("find_root endpoint"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing { f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + f64::MIN_POSITIVE;
        let xm = 0.5 * (c - b);
        if fb.abs() <= tol || xm.abs() <= tol1 {
            return Ok(b);
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
        if !fb.is_finite() {
            return Err(Error::NonFinite("find_root iterate"));
        }
    }
    Err(Error::Convergence {
        context: "find_root".into(),
        iterations: MAX_ITER,
    })
}
