//! Hyperbolic systems relating `(β, γ)` to the ray coordinates `(s, t)`, and
//! the two Sp(2,R) wall families.
//!
//! ```text
//! sinh²(2s) + sinh²(s) = sinh²β + sinh²γ
//! sinh(2t) sinh(t)     = sinh β sinh γ
//! ```
//!
//! Residuals of the scalar equations are reported relative to `max(1, rhs)`,
//! since the right-hand sides grow like `e^{2β}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{d_a_prime, d_a_sp2, d_theta, u_theta, v_elem, GroupElement};
use crate::kak::{beta_gamma_sp2, ChamberPointSp2};
use crate::roots::{bisect_increasing, BisectOptions};

/// Largest `β` for which `sinh²(2β)` stays finite.
pub const MAX_BETA: f64 = 170.0;
/// Residual bound for the one-dimensional solves.
pub const SCALAR_TOL: f64 = 1e-12;
/// Chamber mismatch bound for the two-dimensional wall solves.
pub const WALL_TOL: f64 = 1e-8;

const OUTER_MAX_ITER: usize = 500;

fn check_chamber(beta: f64, gamma: f64) -> Result<()> {
    if !(beta >= gamma && gamma >= 0.0) {
        return Err(Error::Ordering(format!(
            "need beta >= gamma >= 0, got ({beta}, {gamma})"
        )));
    }
    if beta > MAX_BETA {
        return Err(Error::Domain {
            name: "beta",
            value: beta,
            expected: "beta <= 170",
        });
    }
    Ok(())
}

pub fn lhs_s(x: f64) -> f64 {
    (2.0 * x).sinh().powi(2) + x.sinh().powi(2)
}

pub fn lhs_t(x: f64) -> f64 {
    (2.0 * x).sinh() * x.sinh()
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs).abs() / rhs.max(1.0)
}

/// Nonnegative root of `lhs(x) = rhs` for a strictly increasing `lhs` with `lhs(0) = 0`.
fn solve_increasing(lhs: fn(f64) -> f64, rhs: f64, hi: f64) -> Result<f64> {
    if rhs == 0.0 {
        return Ok(0.0);
    }
    let opts = BisectOptions {
        max_iter: 400,
        x_tol: 0.0,
        f_tol: 0.0,
    };
    let root = bisect_increasing(|x| lhs(x) / rhs - 1.0, 0.0, hi, opts)?;
    let res = relative(lhs(root.x), rhs);
    if res > SCALAR_TOL {
        return Err(Error::NoConvergence {
            what: "scalar sinh equation",
            iterations: root.iterations,
            residual: res,
        });
    }
    Ok(root.x)
}

pub fn solve_s(beta: f64, gamma: f64) -> Result<f64> {
    check_chamber(beta, gamma)?;
    solve_increasing(lhs_s, beta.sinh().powi(2) + gamma.sinh().powi(2), beta + 1.0)
}

pub fn solve_t(beta: f64, gamma: f64) -> Result<f64> {
    check_chamber(beta, gamma)?;
    solve_increasing(lhs_t, beta.sinh() * gamma.sinh(), beta + 1.0)
}

/// Inverse of `(β, γ) ↦ (s, t)` via `z² − A z + B² = 0`, `z = sinh²β`.
pub fn solve_beta_gamma(s: f64, t: f64) -> Result<(f64, f64)> {
    if !(s >= t && t >= 0.0) {
        return Err(Error::Ordering(format!("need s >= t >= 0, got ({s}, {t})")));
    }
    let a = lhs_s(s);
    let b = lhs_t(t);
    if a == 0.0 {
        return Ok((0.0, 0.0));
    }
    let disc = (a - 2.0 * b) * (a + 2.0 * b);
    if disc < -1e-12 * a * a {
        return Err(Error::NegativeDiscriminant(disc / (a * a)));
    }
    let z_plus = 0.5 * (a + disc.max(0.0).sqrt());
    let z_minus = b * b / z_plus;
    Ok((z_plus.sqrt().asinh(), z_minus.sqrt().asinh()))
}

/// A chamber point together with its ray coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SinhSolution {
    pub beta: f64,
    pub gamma: f64,
    pub s: f64,
    pub t: f64,
    pub residual_s: f64,
    pub residual_t: f64,
}

impl SinhSolution {
    pub fn from_chamber(beta: f64, gamma: f64) -> Result<Self> {
        let s = solve_s(beta, gamma)?;
        let t = solve_t(beta, gamma)?;
        Ok(Self::assemble(beta, gamma, s, t))
    }

    pub fn from_ray(s: f64, t: f64) -> Result<Self> {
        let (beta, gamma) = solve_beta_gamma(s, t)?;
        Ok(Self::assemble(beta, gamma, s, t))
    }

    fn assemble(beta: f64, gamma: f64, s: f64, t: f64) -> Self {
        Self {
            beta,
            gamma,
            s,
            t,
            residual_s: relative(lhs_s(s), beta.sinh().powi(2) + gamma.sinh().powi(2)),
            residual_t: relative(lhs_t(t), beta.sinh() * gamma.sinh()),
        }
    }
}

/// `θ(r) = arctan √((1 − r)/(1 + r))`.
pub fn theta_of_r(r: f64) -> f64 {
    ((1.0 - r) / (1.0 + r)).sqrt().atan()
}

/// `D'_a d_{θ(r)} v D'_a`.
pub fn t_wall_element(a: f64, r: f64) -> GroupElement {
    let d = d_a_prime(a);
    let inner = d_theta(theta_of_r(r)).mul(&v_elem()).expect("same group");
    d.mul(&inner).and_then(|g| g.mul(&d)).expect("same ambient group")
}

/// `D_a u_θ D_a`.
pub fn s_wall_element(a: f64, theta: f64) -> GroupElement {
    let d = d_a_sp2(a);
    d.mul(&u_theta(theta))
        .and_then(|g| g.mul(&d))
        .expect("same ambient group")
}

fn chamber_of(g: &GroupElement) -> ChamberPointSp2 {
    beta_gamma_sp2(g).expect("wall elements are symplectic")
}

/// Solution `(a, parameter)` of a wall problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallSolution {
    pub a: f64,
    /// `r` for the T wall, `θ` for the S wall.
    pub param: f64,
    /// Max coordinate mismatch of the recovered chamber point.
    pub residual: f64,
    pub newton_used: bool,
}

#[derive(Clone, Copy)]
enum Wall {
    T,
    S,
}

impl Wall {
    fn element(self, a: f64, p: f64) -> GroupElement {
        match self {
            Wall::T => t_wall_element(a, p),
            Wall::S => s_wall_element(a, p),
        }
    }

    fn param_range(self) -> (f64, f64) {
        match self {
            Wall::T => (0.0, 0.5),
            Wall::S => (0.0, std::f64::consts::FRAC_PI_2),
        }
    }

    /// Inner quantity, oriented to be nondecreasing in the parameter.
    fn inner_value(self, c: ChamberPointSp2) -> f64 {
        match self {
            Wall::T => c.gamma,
            Wall::S => c.gamma - c.beta,
        }
    }

    fn outer_hi(self, beta: f64) -> f64 {
        match self {
            Wall::T => beta.max(1.0),
            Wall::S => beta + 1.0,
        }
    }
}

fn inner_solve(wall: Wall, a: f64, target: f64) -> f64 {
    let (lo, hi) = wall.param_range();
    let f = |p: f64| wall.inner_value(chamber_of(&wall.element(a, p))) - target;
    let opts = BisectOptions {
        max_iter: 200,
        x_tol: 1e-16,
        f_tol: 1e-13,
    };
    match bisect_increasing(f, lo, hi, opts) {
        Ok(root) => root.x,
        Err(_) => {
            if f(hi) < 0.0 {
                hi
            } else {
                lo
            }
        }
    }
}

fn solve_wall(wall: Wall, beta: f64, gamma: f64) -> Result<WallSolution> {
    let target = ChamberPointSp2 { beta, gamma };
    let inner_target = wall.inner_value(target);
    let outer = |a: f64| {
        let p = inner_solve(wall, a, inner_target);
        chamber_of(&wall.element(a, p)).beta - beta
    };
    let opts = BisectOptions {
        max_iter: OUTER_MAX_ITER,
        x_tol: 1e-15,
        f_tol: 1e-12,
    };
    let root = bisect_increasing(outer, 0.0, wall.outer_hi(beta), opts)?;
    let a = root.x;
    let p = inner_solve(wall, a, inner_target);
    let residual = chamber_of(&wall.element(a, p)).max_abs_diff(&target);
    if residual <= WALL_TOL {
        return Ok(WallSolution { a, param: p, residual, newton_used: false });
    }
    damped_newton(wall, target, a, p)
}

/// Two-dimensional damped Newton polish with a finite-difference Jacobian.
fn damped_newton(wall: Wall, target: ChamberPointSp2, a0: f64, p0: f64) -> Result<WallSolution> {
    let (lo, hi) = wall.param_range();
    let eval = |a: f64, p: f64| {
        let c = chamber_of(&wall.element(a, p));
        [c.beta - target.beta, c.gamma - target.gamma]
    };
    let norm = |v: [f64; 2]| v[0].abs().max(v[1].abs());
    let (mut a, mut p) = (a0, p0);
    let mut f = eval(a, p);
    for _ in 0..100 {
        if norm(f) <= WALL_TOL {
            return Ok(WallSolution { a, param: p, residual: norm(f), newton_used: true });
        }
        let h = 1e-7;
        let fa = eval(a + h, p);
        let fp = eval(a, (p + h).min(hi));
        let hp = (p + h).min(hi) - p;
        let j = [
            [(fa[0] - f[0]) / h, (fp[0] - f[0]) / hp],
            [(fa[1] - f[1]) / h, (fp[1] - f[1]) / hp],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let da = (j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dp = (j[0][0] * f[1] - j[1][0] * f[0]) / det;
        let mut step = 1.0;
        loop {
            let (na, np) = (a - step * da, (p - step * dp).clamp(lo, hi));
            let nf = eval(na, np);
            if norm(nf) < norm(f) {
                a = na;
                p = np;
                f = nf;
                break;
            }
            step *= 0.5;
            if step < 1e-6 {
                return Err(Error::NoConvergence {
                    what: "wall solve",
                    iterations: OUTER_MAX_ITER,
                    residual: norm(f),
                });
            }
        }
    }
    Err(Error::NoConvergence {
        what: "wall solve",
        iterations: OUTER_MAX_ITER,
        residual: norm(f),
    })
}

fn wall_t_unchecked(beta: f64, gamma: f64) -> Result<WallSolution> {
    check_chamber(beta, gamma)?;
    solve_wall(Wall::T, beta, gamma)
}

fn wall_s_unchecked(beta: f64, gamma: f64) -> Result<WallSolution> {
    check_chamber(beta, gamma)?;
    solve_wall(Wall::S, beta, gamma)
}

/// `(a, r)` with `D'_a d_{θ(r)} v D'_a ∈ K D(β, γ) K`; needs `β − γ ≥ 8`.
pub fn solve_wall_t(beta: f64, gamma: f64) -> Result<WallSolution> {
    if !(beta - gamma >= 8.0) {
        return Err(Error::Domain {
            name: "beta - gamma",
            value: beta - gamma,
            expected: "beta - gamma >= 8",
        });
    }
    wall_t_unchecked(beta, gamma)
}

/// `(a, θ)` with `D_a u_θ D_a ∈ K D(β, γ) K`, `θ ∈ [0, π/2]`; needs `γ ≥ 2`.
pub fn solve_wall_s(beta: f64, gamma: f64) -> Result<WallSolution> {
    if !(gamma >= 2.0) {
        return Err(Error::Domain {
            name: "gamma",
            value: gamma,
            expected: "gamma >= 2",
        });
    }
    wall_s_unchecked(beta, gamma)
}

/// A wall solve for a chamber point and for its companion on the ray.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallPair {
    pub point: WallSolution,
    pub companion: WallSolution,
    /// `(2s, s)` for the T wall, `(2t, t)` for the S wall.
    pub companion_chamber: (f64, f64),
    /// `|a_point − a_companion|`.
    pub a_gap: f64,
    /// `|param_point − param_companion|`.
    pub param_gap: f64,
}

impl WallPair {
    fn new(point: WallSolution, companion: WallSolution, cc: (f64, f64)) -> Self {
        Self {
            point,
            companion,
            companion_chamber: cc,
            a_gap: (point.a - companion.a).abs(),
            param_gap: (point.param - companion.param).abs(),
        }
    }
}

pub fn solve_wall_t_pair(beta: f64, gamma: f64) -> Result<WallPair> {
    let point = solve_wall_t(beta, gamma)?;
    let s = solve_s(beta, gamma)?;
    let companion = wall_t_unchecked(2.0 * s, s)?;
    Ok(WallPair::new(point, companion, (2.0 * s, s)))
}

pub fn solve_wall_s_pair(beta: f64, gamma: f64) -> Result<WallPair> {
    let point = solve_wall_s(beta, gamma)?;
    let t = solve_t(beta, gamma)?;
    let companion = wall_s_unchecked(2.0 * t, t)?;
    Ok(WallPair::new(point, companion, (2.0 * t, t)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed form for the T wall: the family splits into two 2x2 blocks.
    fn t_wall_closed_form(beta: f64, gamma: f64) -> (f64, f64) {
        let ch4a = (2.0 * beta).cosh() + (2.0 * gamma).cosh() - 1.0;
        let c = ((2.0 * beta).cosh() - 1.0) / (ch4a - 1.0);
        (ch4a.acosh() / 4.0, 2.0 * (c * (1.0 - c)).sqrt())
    }

    #[test]
    fn trivial_chamber_has_trivial_ray() {
        assert_eq!(solve_s(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(solve_t(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(solve_beta_gamma(0.0, 0.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn ray_points_are_fixed() {
        assert!((solve_s(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((solve_t(2.0, 1.0).unwrap() - 1.0).abs() < 1e-14);
        let (b, g) = solve_beta_gamma(1.0, 1.0).unwrap();
        assert!((b - 2.0).abs() < 1e-12 && (g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn s_lower_bound_at_three_one() {
        let s = solve_s(3.0, 1.0).unwrap();
        assert!(s >= 0.75);
        let t = solve_t(3.0, 1.0).unwrap();
        assert!(t >= 0.5);
    }

    #[test]
    fn ordering_violations_are_errors() {
        assert!(matches!(solve_s(1.0, 2.0), Err(Error::Ordering(_))));
        assert!(matches!(solve_beta_gamma(1.0, 2.0), Err(Error::Ordering(_))));
    }

    #[test]
    fn round_trip_through_ray() {
        for &(b, g) in &[(3.0, 1.0), (10.0, 0.5), (7.0, 7.0), (0.3, 0.0), (40.0, 12.0)] {
            let sol = SinhSolution::from_chamber(b, g).unwrap();
            assert!(sol.residual_s <= SCALAR_TOL && sol.residual_t <= SCALAR_TOL);
            if sol.s < sol.t {
                // Near the diagonal t exceeds s and the inverse is outside its domain.
                assert!(solve_beta_gamma(sol.s, sol.t).is_err());
                continue;
            }
            let (b2, g2) = solve_beta_gamma(sol.s, sol.t).unwrap();
            assert!((b2 - b).abs() < 1e-10 && (g2 - g).abs() < 1e-10, "{b} {g}: {b2} {g2}");
        }
    }

    #[test]
    fn theta_range_on_t_wall() {
        assert!((theta_of_r(0.0) - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!((theta_of_r(0.5) - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
    }

    #[test]
    fn t_wall_at_twelve_two() {
        let sol = solve_wall_t(12.0, 2.0).unwrap();
        let (a, r) = t_wall_closed_form(12.0, 2.0);
        assert!((sol.a - a).abs() < 1e-9 && (sol.param - r).abs() < 1e-9, "{sol:?} vs {a} {r}");
        assert!(sol.param <= 2.0 * (-2.5f64).exp());
        assert!(sol.residual <= WALL_TOL);
    }

    #[test]
    fn t_wall_plant_and_recover() {
        for &(a, r) in &[(3.0, 0.01), (5.0, 0.2), (6.5, 0.45), (4.0, 0.0)] {
            let c = chamber_of(&t_wall_element(a, r));
            let sol = wall_t_unchecked(c.beta, c.gamma).unwrap();
            let got = chamber_of(&t_wall_element(sol.a, sol.param));
            assert!(got.max_abs_diff(&c) <= WALL_TOL, "{a} {r}: {sol:?}");
        }
    }

    #[test]
    fn t_wall_pair_shares_a() {
        let pair = solve_wall_t_pair(12.0, 2.0).unwrap();
        assert!(pair.a_gap < 1e-8, "{pair:?}");
    }

    #[test]
    fn s_wall_plant_and_recover() {
        for &(a, th) in &[(3.0, 0.3), (5.0, 1.2), (2.5, 1.5), (6.0, 0.05)] {
            let c = chamber_of(&s_wall_element(a, th));
            let sol = wall_s_unchecked(c.beta, c.gamma).unwrap();
            let got = chamber_of(&s_wall_element(sol.a, sol.param));
            assert!(got.max_abs_diff(&c) <= WALL_TOL, "{a} {th}: {sol:?}");
        }
    }

    #[test]
    fn s_wall_pair_theta_gap() {
        for &(b, g) in &[(3.0, 2.0), (5.0, 2.0), (10.0, 2.0), (9.0, 4.0), (8.0, 7.5)] {
            let pair = solve_wall_s_pair(b, g).unwrap();
            assert!(pair.param_gap <= (-g / 2.0).exp() * (1.0 + 1e-6), "{b} {g}: {pair:?}");
            assert!(pair.a_gap < 1e-8, "{b} {g}: {pair:?}");
        }
    }

    #[test]
    fn s_wall_requires_gamma_two() {
        assert!(matches!(solve_wall_s(5.0, 1.0), Err(Error::Domain { .. })));
    }
}
