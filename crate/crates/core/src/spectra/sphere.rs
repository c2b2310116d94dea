//! Band-limited functions on the 2-sphere and the circle-averaging operator
//! `Θ_δ`, evaluated by direct quadrature.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::legendre::legendre_all;

/// Largest band limit accepted by [`quad_apply_theta`].
pub const MAX_BAND: usize = 16;
/// Circle quadrature size the adaptive scheme starts from.
pub const DEFAULT_CIRCLE_POINTS: usize = 512;
const QUAD_AGREEMENT: f64 = 1e-10;
const MAX_CIRCLE_POINTS: usize = 1 << 16;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, q) = legendre_pair(n, x);
            dp = nf * (x * p - q) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (p, q) = legendre_pair(n, x);
        dp = if p.is_finite() { nf * (x * p - q) / (x * x - 1.0) } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_n(x), P_{n−1}(x))`.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let all = legendre_all(n, x);
    (all[n], if n == 0 { 0.0 } else { all[n - 1] })
}

/// Number of real spherical harmonics of degree at most `band`.
pub fn harmonic_count(band: usize) -> usize {
    (band + 1) * (band + 1)
}

/// Position of `Y_{ℓ,m}` in coefficient vectors.
pub fn harmonic_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Real orthonormal spherical harmonics `Y_{ℓ,m}(x)`, `ℓ ≤ band`, for a unit vector `x`.
pub fn real_harmonics(band: usize, x: [f64; 3]) -> Vec<f64> {
    let z = x[2].clamp(-1.0, 1.0);
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let phi = x[1].atan2(x[0]);
    let mut out = vec![0.0; harmonic_count(band)];
    let inv_sqrt_4pi = 0.5 / std::f64::consts::PI.sqrt();
    let mut pmm = inv_sqrt_4pi;
    for m in 0..=band {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * rho;
        }
        let (sin_m, cos_m) = (m as f64 * phi).sin_cos();
        let mut put = |l: usize, val: f64| {
            if m == 0 {
                out[l * l + l] = val;
            } else {
                let s2 = std::f64::consts::SQRT_2;
                out[l * l + l + m] = s2 * val * cos_m;
                out[l * l + l - m] = s2 * val * sin_m;
            }
        };
        put(m, pmm);
        if m == band {
            break;
        }
        let mut p_prev = pmm;
        let mut p_cur = (2.0 * m as f64 + 3.0).sqrt() * z * pmm;
        put(m + 1, p_cur);
        for l in (m + 2)..=band {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let next = a * (z * p_cur - b * p_prev);
            p_prev = p_cur;
            p_cur = next;
            put(l, p_cur);
        }
    }
    out
}

/// Product grid exact for polynomials of degree `≤ 2·band + 1`.
pub struct SphereGrid {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        let (zs, ws) = gauss_legendre(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut points = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (z, w) in zs.iter().zip(&ws) {
            let rho = (1.0 - z * z).max(0.0).sqrt();
            for j in 0..n_phi {
                let (s, c) = (j as f64 * dphi).sin_cos();
                points.push([rho * c, rho * s, *z]);
                weights.push(w * dphi);
            }
        }
        Self { points, weights }
    }

    pub fn for_band(band: usize) -> Self {
        Self::new(band + 2, 2 * band + 3)
    }

    /// Coefficients of the band-limited function with the given grid values.
    pub fn project(&self, band: usize, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; harmonic_count(band)];
        for ((x, w), v) in self.points.iter().zip(&self.weights).zip(values) {
            for (o, y) in out.iter_mut().zip(real_harmonics(band, *x)) {
                *o += w * v * y;
            }
        }
        out
    }

    pub fn evaluate(&self, band: usize, coeffs: &[f64]) -> Vec<f64> {
        self.points.iter().map(|x| eval_harmonics(band, coeffs, *x)).collect()
    }
}

pub fn eval_harmonics(band: usize, coeffs: &[f64], x: [f64; 3]) -> f64 {
    real_harmonics(band, x).iter().zip(coeffs).map(|(y, c)| y * c).sum()
}

fn band_of(coeffs: &[f64]) -> Result<usize> {
    let band = (coeffs.len() as f64).sqrt().round() as usize;
    if band * band != coeffs.len() || band == 0 {
        return Err(Error::Shape {
            expected: harmonic_count(band.saturating_sub(1)),
            rows: coeffs.len(),
            cols: 1,
        });
    }
    Ok(band - 1)
}

fn tangent_frame(x: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let a = if x[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let d = a[0] * x[0] + a[1] * x[1] + a[2] * x[2];
    let mut e1 = [a[0] - d * x[0], a[1] - d * x[1], a[2] - d * x[2]];
    let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    e1.iter_mut().for_each(|v| *v /= n);
    let e2 = [
        x[1] * e1[2] - x[2] * e1[1],
        x[2] * e1[0] - x[0] * e1[2],
        x[0] * e1[1] - x[1] * e1[0],
    ];
    (e1, e2)
}

/// `Θ_δ f` on the grid, averaging each circle `⟨x, y⟩ = δ` with `m` points.
fn circle_average(grid: &SphereGrid, band: usize, coeffs: &[f64], delta: f64, m: usize) -> Vec<f64> {
    let rho = (1.0 - delta * delta).max(0.0).sqrt();
    let angles: Vec<(f64, f64)> = (0..m)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / m as f64).sin_cos())
        .collect();
    grid.points
        .iter()
        .map(|&x| {
            let (e1, e2) = tangent_frame(x);
            let mut acc = 0.0;
            for &(s, c) in &angles {
                let y = [
                    delta * x[0] + rho * (c * e1[0] + s * e2[0]),
                    delta * x[1] + rho * (c * e1[1] + s * e2[1]),
                    delta * x[2] + rho * (c * e1[2] + s * e2[2]),
                ];
                acc += eval_harmonics(band, coeffs, y);
            }
            acc / m as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub coeffs: Vec<f64>,
    /// Circle quadrature size at which two successive refinements agreed.
    pub circle_points: usize,
    pub refinement_gap: f64,
}

/// Applies `Θ_δ` to a band-limited function given by real harmonic
/// coefficients, doubling the circle quadrature from `m` until two successive
/// results agree to `1e-10`.
pub fn quad_apply_theta(coeffs: &[f64], delta: f64, m: usize) -> Result<QuadResult> {
    if !(delta.abs() <= 1.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "|delta| <= 1",
        });
    }
    if m < 64 {
        return Err(Error::Domain {
            name: "M",
            value: m as f64,
            expected: "M >= 64",
        });
    }
    let band = band_of(coeffs)?;
    if band > MAX_BAND {
        return Err(Error::Domain {
            name: "band",
            value: band as f64,
            expected: "band <= 16",
        });
    }
    let grid = SphereGrid::for_band(band);
    let apply = |m: usize| grid.project(band, &circle_average(&grid, band, coeffs, delta, m));
    let mut m = m;
    let mut prev = apply(m);
    loop {
        let next = apply(2 * m);
        let gap = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        m *= 2;
        if gap <= QUAD_AGREEMENT {
            return Ok(QuadResult { coeffs: next, circle_points: m, refinement_gap: gap });
        }
        if m >= MAX_CIRCLE_POINTS {
            return Err(Error::NoConvergence {
                what: "circle quadrature",
                iterations: m,
                residual: gap,
            });
        }
        prev = next;
    }
}

/// Spectral application of `Θ_δ`: degree-`ℓ` coefficients scaled by `P_ℓ(δ)`.
pub fn spectral_apply_theta(coeffs: &[f64], delta: f64) -> Result<Vec<f64>> {
    let band = band_of(coeffs)?;
    let eig = legendre_all(band, delta);
    let mut out = coeffs.to_vec();
    for l in 0..=band {
        for v in &mut out[l * l..(l + 1) * (l + 1)] {
            *v *= eig[l];
        }
    }
    Ok(out)
}

/// Quadrature matrix of `Θ_δ` on all harmonics of degree `≤ band`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadMatrix {
    /// Column `j` holds the coefficients of `Θ_δ Y_j`.
    pub matrix: DMatrix<f64>,
    pub circle_points: usize,
    pub refinement_gap: f64,
}

/// `Θ_δ` applied to every basis harmonic at once: each circle point evaluates
/// the whole basis, so the cost is that of a single application.
fn circle_average_basis(grid: &SphereGrid, band: usize, delta: f64, m: usize) -> DMatrix<f64> {
    let n = harmonic_count(band);
    let rho = (1.0 - delta * delta).max(0.0).sqrt();
    let angles: Vec<(f64, f64)> = (0..m)
        .map(|k| (2.0 * std::f64::consts::PI * k as f64 / m as f64).sin_cos())
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for (x, w) in grid.points.iter().zip(&grid.weights) {
        let (e1, e2) = tangent_frame(*x);
        let mut avg = vec![0.0; n];
        for &(s, c) in &angles {
            let y = [
                delta * x[0] + rho * (c * e1[0] + s * e2[0]),
                delta * x[1] + rho * (c * e1[1] + s * e2[1]),
                delta * x[2] + rho * (c * e1[2] + s * e2[2]),
            ];
            for (a, v) in avg.iter_mut().zip(real_harmonics(band, y)) {
                *a += v;
            }
        }
        let yx = real_harmonics(band, *x);
        for j in 0..n {
            let v = w * avg[j] / m as f64;
            for i in 0..n {
                out[(i, j)] += v * yx[i];
            }
        }
    }
    out
}

/// Matrix form of [`quad_apply_theta`], with the same refinement rule.
pub fn quad_theta_matrix(band: usize, delta: f64, m: usize) -> Result<QuadMatrix> {
    if !(delta.abs() <= 1.0) {
        return Err(Error::Domain { name: "delta", value: delta, expected: "|delta| <= 1" });
    }
    if m < 64 {
        return Err(Error::Domain { name: "M", value: m as f64, expected: "M >= 64" });
    }
    if band > MAX_BAND {
        return Err(Error::Domain { name: "band", value: band as f64, expected: "band <= 16" });
    }
    let grid = SphereGrid::for_band(band);
    let mut m = m;
    let mut prev = circle_average_basis(&grid, band, delta, m);
    loop {
        let next = circle_average_basis(&grid, band, delta, 2 * m);
        let gap = (&next - &prev).amax();
        m *= 2;
        if gap <= QUAD_AGREEMENT {
            return Ok(QuadMatrix { matrix: next, circle_points: m, refinement_gap: gap });
        }
        if m >= MAX_CIRCLE_POINTS {
            return Err(Error::NoConvergence { what: "circle quadrature", iterations: m, residual: gap });
        }
        prev = next;
    }
}

fn lp_norm(grid: &SphereGrid, values: &[f64], p: f64) -> f64 {
    grid.weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Empirical lower bound for the `L_p(S²)` operator norm of `Θ_δ − Θ_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpLowerBound {
    pub p: f64,
    pub delta: f64,
    pub band: usize,
    pub samples: usize,
    pub best_ratio: f64,
}

/// Largest `‖(Θ_δ − Θ_0) f‖_p / ‖f‖_p` over random Gaussian band-limited `f`.
pub fn lp_gap_lower_bound(delta: f64, p: f64, band: usize, samples: usize, seed: u64) -> Result<LpLowerBound> {
    if !(p >= 1.0) {
        return Err(Error::Domain { name: "p", value: p, expected: "p >= 1" });
    }
    if !(delta.abs() <= 1.0) {
        return Err(Error::Domain { name: "delta", value: delta, expected: "|delta| <= 1" });
    }
    let grid = SphereGrid::new(2 * band + 8, 4 * band + 16);
    let eig_d = legendre_all(band, delta);
    let eig_0 = legendre_all(band, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let f: Vec<f64> = (0..harmonic_count(band)).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut g = f.clone();
        for l in 0..=band {
            for v in &mut g[l * l..(l + 1) * (l + 1)] {
                *v *= eig_d[l] - eig_0[l];
            }
        }
        let nf = lp_norm(&grid, &grid.evaluate(band, &f), p);
        let ng = lp_norm(&grid, &grid.evaluate(band, &g), p);
        if nf > 0.0 {
            best = best.max(ng / nf);
        }
    }
    Ok(LpLowerBound { p, delta, band, samples, best_ratio: best })
}
