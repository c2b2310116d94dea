//! Legendre polynomials, the circle-averaging spectrum and the interpolation
//! function `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `P_n(x)` by the three-term recurrence.
pub fn legendre(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `[P_0(x), …, P_n(x)]`.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for k in 1..n {
        let kf = k as f64;
        out.push(((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0));
    }
    out
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta.abs() <= 1.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "|delta| <= 1",
        });
    }
    Ok(())
}

/// Eigenvalues `P_n(δ)`, `n ≤ N`, of averaging over circles `⟨x, y⟩ = δ` on
/// degree-`n` spherical harmonics.
pub fn theta_delta_eigs(delta: f64, n_max: usize) -> Result<Vec<f64>> {
    check_delta(delta)?;
    Ok(legendre_all(n_max, delta))
}

/// `sup_{n ≤ N} |P_n(δ) − P_n(0)|`, the L2 norm of `Θ_δ − Θ_0` up to degree `N`.
pub fn theta_gap_norm(delta: f64, n_max: usize) -> Result<f64> {
    let at = theta_delta_eigs(delta, n_max)?;
    let zero = legendre_all(n_max, 0.0);
    Ok(at
        .iter()
        .zip(&zero)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonParams {
    p: f64,
}

impl EpsilonParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p > 1.0) || p.is_infinite() {
            return Err(Error::Domain {
                name: "p",
                value: p,
                expected: "1 < p < inf",
            });
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `2^{1 + 2/p}`, the constant in front of `|δ|^{1/p}`.
    pub fn prefactor(&self) -> f64 {
        2f64.powf(1.0 + 2.0 / self.p)
    }
}

/// `ε(δ) = 2^{1 + 2/p} |δ|^{1/p}`.
pub fn epsilon(params: EpsilonParams, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(params.prefactor() * delta.abs().powf(1.0 / params.p))
}

/// Riesz–Thorin exponent `θ` with `1/p = (1 − θ)/2 + θ/q`.
pub fn interp_theta(p: f64, q: f64) -> Result<f64> {
    if !(p >= 2.0 && q >= p) || p.is_infinite() {
        return Err(Error::IncompatibleExponents { p, q });
    }
    if p == 2.0 {
        return Ok(0.0);
    }
    let inv_q = if q.is_infinite() { 0.0 } else { 1.0 / q };
    Ok((0.5 - 1.0 / p) / (0.5 - inv_q))
}

/// `norm2^{1−θ} · normq^θ`.
pub fn interp_bound(norm2: f64, normq: f64, p: f64, q: f64) -> Result<f64> {
    let theta = interp_theta(p, q)?;
    if theta == 0.0 {
        return Ok(norm2);
    }
    Ok(norm2.powf(1.0 - theta) * normq.powf(theta))
}
