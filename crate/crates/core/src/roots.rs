//! Bracketed bisection for monotone scalar equations.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectOptions {
    pub max_iter: usize,
    /// Stop once the bracket is narrower than this.
    pub x_tol: f64,
    /// Stop once `|f(x)|` is at most this.
    pub f_tol: f64,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            x_tol: 1e-14,
            f_tol: 1e-10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x)` at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Root of a nondecreasing `f` on `[lo, hi]`.
///
/// Endpoints are tried first, so a root sitting exactly on the bracket is
/// returned without iterating. A sign pattern that rules out a root inside the
/// bracket gives [`Error::OutOfBracket`] carrying the endpoint values.
pub fn bisect_increasing<F>(f: F, lo: f64, hi: f64, opts: BisectOptions) -> Result<Root>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    if fa.abs() <= opts.f_tol {
        return Ok(Root { x: a, residual: fa, iterations: 0 });
    }
    let fb = f(b);
    if fb.abs() <= opts.f_tol {
        return Ok(Root { x: b, residual: fb, iterations: 0 });
    }
    if fa > 0.0 || fb < 0.0 || fa.is_nan() || fb.is_nan() {
        return Err(Error::OutOfBracket { value: 0.0, lo: fa, hi: fb });
    }
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for it in 1..=opts.max_iter {
        let m = 0.5 * (a + b);
        if b - a <= opts.x_tol || m <= a || m >= b {
            return Ok(Root { x: best.0, residual: best.1, iterations: it });
        }
        let fm = f(m);
        if fm.abs() < best.1.abs() {
            best = (m, fm);
        }
        if fm.abs() <= opts.f_tol {
            return Ok(Root { x: m, residual: fm, iterations: it });
        }
        if fm < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Err(Error::NoConvergence {
        what: "bisection",
        iterations: opts.max_iter,
        residual: best.1,
    })
}
