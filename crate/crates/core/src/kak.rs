//! Cartan coordinates and KAK factorizations.
//!
//! SL(3,R) chamber coordinates come from the top singular values of `g` and of
//! its cofactor matrix (the second exterior power), which keeps the middle
//! coordinate accurate even when `g` is strongly graded. Sp(2,R) factors are
//! assembled from a singular basis completed with the complex structure, so both
//! compact factors land in the embedded U(2) by construction.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Matrix4, SVD, U4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{
    cofactor3, d_a_sl3, d_beta_gamma, d_rst, k_delta, to_matrix3, GroupElement, GroupTag,
    INTERNAL_TOL,
};
use crate::roots::{bisect_increasing, BisectOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberPointSL3 {
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl ChamberPointSL3 {
    pub fn new(r: f64, s: f64, t: f64) -> Result<Self> {
        let scale = 1.0 + r.abs() + s.abs() + t.abs();
        let sum = r + s + t;
        if sum.abs() > INTERNAL_TOL * scale {
            return Err(Error::SumNotZero(sum));
        }
        if r < s || s < t {
            return Err(Error::Ordering(format!("need r >= s >= t, got ({r}, {s}, {t})")));
        }
        Ok(Self { r, s, t })
    }

    /// Sorts descending (stable) and removes the mean.
    pub fn from_unsorted(v: [f64; 3]) -> Self {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| v[j].partial_cmp(&v[i]).unwrap_or(std::cmp::Ordering::Equal));
        let mean = (v[0] + v[1] + v[2]) / 3.0;
        Self {
            r: v[idx[0]] - mean,
            s: v[idx[1]] - mean,
            t: v[idx[2]] - mean,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.r, self.s, self.t]
    }

    pub fn diag(&self) -> GroupElement {
        d_rst(self.r, self.s, -self.r - self.s).expect("exponents sum to zero")
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.r - other.r)
            .abs()
            .max((self.s - other.s).abs())
            .max((self.t - other.t).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChamberPointSp2 {
    pub beta: f64,
    pub gamma: f64,
}

impl ChamberPointSp2 {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta >= gamma && gamma >= 0.0) {
            return Err(Error::Ordering(format!(
                "need beta >= gamma >= 0, got ({beta}, {gamma})"
            )));
        }
        Ok(Self { beta, gamma })
    }

    pub fn diag(&self) -> GroupElement {
        d_beta_gamma(self.beta, self.gamma)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.beta - other.beta)
            .abs()
            .max((self.gamma - other.gamma).abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChamberPoint {
    Sl3(ChamberPointSL3),
    Sp2(ChamberPointSp2),
}

impl ChamberPoint {
    pub fn group(&self) -> GroupTag {
        match self {
            ChamberPoint::Sl3(_) => GroupTag::Sl3,
            ChamberPoint::Sp2(_) => GroupTag::Sp2,
        }
    }

    pub fn diag(&self) -> GroupElement {
        match self {
            ChamberPoint::Sl3(c) => c.diag(),
            ChamberPoint::Sp2(c) => c.diag(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        match (self, other) {
            (ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => Some(a.max_abs_diff(b)),
            (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => Some(a.max_abs_diff(b)),
            _ => None,
        }
    }
}

/// `g = k · D(chamber) · k2` with `k`, `k2` in the maximal compact subgroup.
#[derive(Clone, Debug, PartialEq)]
pub struct KakFactorization {
    pub k: GroupElement,
    pub chamber: ChamberPoint,
    pub k2: GroupElement,
}

impl KakFactorization {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.k.matrix() * self.chamber.diag().matrix() * self.k2.matrix()
    }

    /// `‖k D k2 − g‖_max`.
    pub fn residual(&self, g: &GroupElement) -> f64 {
        (self.reconstruct() - g.matrix()).amax()
    }
}

fn require(g: &GroupElement, ambient: GroupTag, expected: &'static str) -> Result<()> {
    if g.tag().ambient() != ambient {
        return Err(Error::WrongGroup { expected, actual: g.tag() });
    }
    Ok(())
}

fn top_singular_value(m: &Matrix3<f64>) -> f64 {
    m.svd(false, false).singular_values.max()
}

/// Cartan coordinates `(γ1, γ2, γ3)` of an SL(3,R) element.
pub fn gamma_sl3(g: &GroupElement) -> Result<ChamberPointSL3> {
    require(g, GroupTag::Sl3, "SL(3,R)")?;
    let m = to_matrix3(g.matrix());
    let l1 = top_singular_value(&m).ln();
    let l12 = top_singular_value(&cofactor3(&m)).ln();
    Ok(ChamberPointSL3::from_unsorted([l1, l12 - l1, -l12]))
}

pub fn kak_sl3(g: &GroupElement) -> Result<KakFactorization> {
    let chamber = gamma_sl3(g)?;
    let svd = to_matrix3(g.matrix()).svd(true, true);
    let mut u = svd.u.expect("left singular vectors requested");
    let mut v_t = svd.v_t.expect("right singular vectors requested");
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
        v_t.row_mut(2).neg_mut();
    }
    let to_dyn = |m: Matrix3<f64>| DMatrix::from_iterator(3, 3, m.iter().copied());
    Ok(KakFactorization {
        k: GroupElement::trusted(GroupTag::So3, to_dyn(u)),
        chamber: ChamberPoint::Sl3(chamber),
        k2: GroupElement::trusted(GroupTag::So3, to_dyn(v_t)),
    })
}

const RECIPROCAL_TOL: f64 = 1e-9;

/// Fixed-size SVD of a 4x4 matrix. The dynamic-size routine stops early on
/// strongly graded matrices and loses relative accuracy in the middle values.
fn svd4(m: &DMatrix<f64>, vectors: bool) -> SVD<f64, U4, U4> {
    Matrix4::from_iterator(m.iter().copied()).svd(vectors, vectors)
}

/// Second exterior power of a 4x4 matrix in the basis `e_i ∧ e_j`, `i < j`.
fn wedge2(m: &DMatrix<f64>) -> DMatrix<f64> {
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    DMatrix::from_fn(6, 6, |row, col| {
        let (i, j) = PAIRS[row];
        let (k, l) = PAIRS[col];
        m[(i, k)] * m[(j, l)] - m[(i, l)] * m[(j, k)]
    })
}

/// `(s1, s2)` with `s2 = s1(Λ²g) / s1(g)`, which keeps relative accuracy even
/// when `s2 < eps · s1` and a plain SVD cannot resolve it. The two smallest
/// singular values must be `1/s2`, `1/s1` to the SVD's absolute accuracy
/// `eps · s1`.
fn sp2_top_singular_values(g: &GroupElement) -> Result<(f64, f64)> {
    require(g, GroupTag::Sp2, "Sp(2,R)")?;
    let sv = svd4(g.matrix(), false).singular_values;
    let mut s = [sv[0], sv[1], sv[2], sv[3]];
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let top2 = wedge2(g.matrix()).svd(false, false).singular_values.max();
    let s1 = s[0];
    let s2 = top2 / s1;
    let dev = (s[3] - 1.0 / s1).abs().max((s[2] - 1.0 / s2).abs()) / s1;
    if !(dev <= RECIPROCAL_TOL) {
        return Err(Error::NotReciprocal(dev));
    }
    Ok((s1, s2))
}

/// Cartan coordinates `(β, γ)` of an Sp(2,R) element.
///
/// `γ` is read off `ln s1(Λ²g) − ln s1(g)` so that it keeps relative accuracy
/// when `β ≫ γ`.
pub fn beta_gamma_sp2(g: &GroupElement) -> Result<ChamberPointSp2> {
    let (s1, s2) = sp2_top_singular_values(g)?;
    let beta = s1.ln().max(0.0);
    let gamma = s2.ln().clamp(0.0, beta);
    Ok(ChamberPointSp2 { beta, gamma })
}

/// `J^{-1} x`, i.e. multiplication by `i` under `z = x + i y`.
fn j_inv(x: &DVector<f64>) -> DVector<f64> {
    DVector::from_column_slice(&[-x[2], -x[3], x[0], x[1]])
}

/// Removes the complex-linear span of the unit vector `e` from `x`.
fn complex_orthogonalize(x: &DVector<f64>, e: &DVector<f64>) -> DVector<f64> {
    let je = j_inv(e);
    x - e * e.dot(x) - &je * je.dot(x)
}

fn complex_frame(c1: &DVector<f64>, c2: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_columns(&[c1.clone(), c2.clone(), j_inv(c1), j_inv(c2)])
}

pub fn kak_sp2(g: &GroupElement) -> Result<KakFactorization> {
    let chamber = beta_gamma_sp2(g)?;
    let svd = svd4(g.matrix(), true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let col = |i: usize| DVector::from_iterator(4, v_t.row(order[i]).iter().copied());

    let u1 = col(0).normalize();
    // Prefer the second singular direction; when it is tied with J^{-1} u1 (only
    // possible at β = γ = 0 up to rounding) fall back to the best remaining one.
    let mut w = complex_orthogonalize(&col(1), &u1);
    if w.norm() < 0.5 {
        for i in 2..4 {
            let cand = complex_orthogonalize(&col(i), &u1);
            if cand.norm() > w.norm() {
                w = cand;
            }
        }
    }
    // The singular directions inside the complex line orthogonal to u1 are
    // poorly resolved by the full SVD when s2 is close to 1/s2. Solve the 2x2
    // problem on that line directly.
    let b1 = w.normalize();
    let b2 = j_inv(&b1);
    let m = g.matrix();
    let (gb1, gb2) = (m * &b1, m * &b2);
    let gram = Matrix2::new(gb1.dot(&gb1), gb1.dot(&gb2), gb2.dot(&gb1), gb2.dot(&gb2));
    let eig = gram.symmetric_eigen();
    let top = if eig.eigenvalues[0] >= eig.eigenvalues[1] { 0 } else { 1 };
    let e = eig.eigenvectors.column(top);
    let u2 = (&b1 * e[0] + &b2 * e[1]).normalize();
    let frame = complex_frame(&u1, &u2);

    let c1 = (m * &u1).normalize();
    let c2 = complex_orthogonalize(&(m * &u2), &c1).normalize();
    let k1 = complex_frame(&c1, &c2);

    Ok(KakFactorization {
        k: GroupElement::trusted(GroupTag::U2Emb, k1),
        chamber: ChamberPoint::Sp2(chamber),
        k2: GroupElement::trusted(GroupTag::U2Emb, frame.transpose()),
    })
}

/// Factorization in whichever group `g` belongs to.
pub fn kak(g: &GroupElement) -> Result<KakFactorization> {
    match g.tag().ambient() {
        GroupTag::Sl3 => kak_sl3(g),
        _ => kak_sp2(g),
    }
}

pub fn chamber(g: &GroupElement) -> Result<ChamberPoint> {
    match g.tag().ambient() {
        GroupTag::Sl3 => gamma_sl3(g).map(ChamberPoint::Sl3),
        _ => beta_gamma_sp2(g).map(ChamberPoint::Sp2),
    }
}

/// `γ1(D_{-t} k_δ D_{-t})`, nondecreasing in `δ ∈ [0, 1]`.
pub fn wall_gamma1(t: f64, delta: f64) -> Result<f64> {
    let d = d_a_sl3(-t);
    let g = d.mul(&k_delta(delta)?)?.mul(&d)?;
    Ok(gamma_sl3(&g)?.r)
}

/// The `δ ∈ [0, 1]` with `γ1(D_{-t} k_δ D_{-t}) = r`.
pub fn solve_delta_sl3(r: f64, t: f64) -> Result<f64> {
    if !(t < 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            expected: "t < 0",
        });
    }
    let (lo, hi) = (-t / 2.0, -2.0 * t);
    let slack = INTERNAL_TOL * (1.0 + t.abs());
    if !(r >= lo - slack && r <= hi + slack) {
        return Err(Error::OutOfBracket { value: r, lo, hi });
    }
    let f = |delta: f64| wall_gamma1(t, delta).map(|g1| g1 - r).unwrap_or(f64::NAN);
    // γ1 is steep in δ near 0, so bisect down to adjacent floats.
    let opts = BisectOptions { max_iter: 2000, x_tol: 0.0, f_tol: 1e-12 };
    bisect_increasing(f, 0.0, 1.0, opts).map(|root| root.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{
        d_a_prime, d_a_sp2, d_beta_gamma, haar_u2, operator_norm, u_theta, HaarSampler,
        MEMBERSHIP_TOL,
    };

    fn sl3_round_trip(c: [f64; 3], seed: u64) -> (GroupElement, ChamberPointSL3) {
        let mut h = HaarSampler::new(seed);
        let (k, k2) = (h.so3(), h.so3());
        let d = d_rst(c[0], c[1], c[2]).unwrap();
        let g = k.mul(&d).unwrap().mul(&k2).unwrap();
        (g, ChamberPointSL3::new(c[0], c[1], c[2]).unwrap())
    }

    #[test]
    fn diagonal_sl3_is_its_own_chamber() {
        let g = d_rst(1.0, 0.5, -1.5).unwrap();
        let c = gamma_sl3(&g).unwrap();
        assert!(c.max_abs_diff(&ChamberPointSL3::new(1.0, 0.5, -1.5).unwrap()) < 1e-14);
    }

    #[test]
    fn rotation_has_trivial_chamber() {
        let c = gamma_sl3(&k_delta(0.2).unwrap()).unwrap();
        assert!(c.as_array().iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn gamma3_on_the_d_a_wall() {
        let d = d_a_sl3(1.0);
        let g = d.mul(&k_delta(0.3).unwrap()).unwrap().mul(&d).unwrap();
        assert!((gamma_sl3(&g).unwrap().t + 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_sp2_input() {
        assert!(matches!(
            gamma_sl3(&d_beta_gamma(1.0, 0.0)),
            Err(Error::WrongGroup { .. })
        ));
        assert!(matches!(
            beta_gamma_sp2(&d_a_sl3(1.0)),
            Err(Error::WrongGroup { .. })
        ));
    }

    #[test]
    fn identity_factorizations() {
        let f = kak_sl3(&GroupElement::identity(GroupTag::Sl3)).unwrap();
        assert_eq!(f.chamber.max_abs_diff(&ChamberPoint::Sl3(ChamberPointSL3 { r: 0.0, s: 0.0, t: 0.0 })), Some(0.0));
        let prod = f.k.matrix() * f.k2.matrix();
        assert!((prod - DMatrix::identity(3, 3)).amax() < 1e-14);

        let g = GroupElement::identity(GroupTag::Sp2);
        let f = kak_sp2(&g).unwrap();
        assert!(f.residual(&g) < 1e-14);
        assert!(f.k.residual() < 1e-14 && f.k2.residual() < 1e-14);
    }

    #[test]
    fn sl3_round_trip_recovers_chamber() {
        for seed in 0..50 {
            let (g, c) = sl3_round_trip([2.0, 0.0, -2.0], seed);
            let f = kak_sl3(&g).unwrap();
            assert!(f.chamber.max_abs_diff(&ChamberPoint::Sl3(c)).unwrap() < 1e-10);
            assert!(f.residual(&g) < 1e-9);
            assert!(f.k.residual() < 1e-12 && f.k2.residual() < 1e-12);
            assert!(f.k.matrix().determinant() > 0.0);
        }
    }

    #[test]
    fn graded_sl3_keeps_middle_coordinate() {
        let (g, c) = sl3_round_trip([8.0, -1.0, -7.0], 9);
        let got = gamma_sl3(&g).unwrap();
        assert!(got.max_abs_diff(&c) < 1e-10, "{got:?}");
    }

    #[test]
    fn sp2_diagonals() {
        let c = beta_gamma_sp2(&d_beta_gamma(3.0, 1.0)).unwrap();
        assert!(c.max_abs_diff(&ChamberPointSp2 { beta: 3.0, gamma: 1.0 }) < 1e-14);
        let c = beta_gamma_sp2(&d_a_prime(1.0)).unwrap();
        assert!(c.max_abs_diff(&ChamberPointSp2 { beta: 1.0, gamma: 1.0 }) < 1e-14);
        let c = beta_gamma_sp2(&haar_u2(4)).unwrap();
        assert!(c.beta < 1e-14 && c.gamma < 1e-14);
    }

    #[test]
    fn sp2_round_trip() {
        let mut h = HaarSampler::new(17);
        for &(b, gm) in &[(3.0, 1.0), (2.0, 2.0), (1.5, 0.0), (0.0, 0.0), (5.0, 4.999)] {
            let (k, k2) = (h.u2(), h.u2());
            let g = k.mul(&d_beta_gamma(b, gm)).unwrap().mul(&k2).unwrap();
            let f = kak_sp2(&g).unwrap();
            let want = ChamberPoint::Sp2(ChamberPointSp2 { beta: b, gamma: gm });
            assert!(f.chamber.max_abs_diff(&want).unwrap() < 1e-9, "{b} {gm}");
            assert!(f.residual(&g) < 1e-9, "{b} {gm}: {}", f.residual(&g));
            assert!(f.k.residual() < MEMBERSHIP_TOL && f.k2.residual() < MEMBERSHIP_TOL);
        }
    }

    #[test]
    fn sp2_wall_element_factorizes() {
        let d = d_a_sp2(2.0);
        let g = d.mul(&u_theta(0.7)).unwrap().mul(&d).unwrap();
        let f = kak_sp2(&g).unwrap();
        assert!(f.residual(&g) < 1e-9);
        assert!(f.k.residual() < MEMBERSHIP_TOL && f.k2.residual() < MEMBERSHIP_TOL);
    }

    #[test]
    fn non_symplectic_input_is_rejected() {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0, 0.5, 1.5]));
        let g = GroupElement::trusted(GroupTag::Sp2, m);
        assert!(matches!(beta_gamma_sp2(&g), Err(Error::NotReciprocal(_))));
    }

    #[test]
    fn operator_norm_matches_top_coordinate() {
        let (g, _) = sl3_round_trip([1.3, 0.2, -1.5], 3);
        let rel = (operator_norm(&g) / gamma_sl3(&g).unwrap().r.exp() - 1.0).abs();
        assert!(rel < 1e-12);
    }

    #[test]
    fn delta_endpoints() {
        let t = -2.0;
        assert_eq!(solve_delta_sl3(-t / 2.0, t).unwrap(), 0.0);
        assert!((solve_delta_sl3(-2.0 * t, t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_bound_at_four_minus_three() {
        let delta = solve_delta_sl3(4.0, -3.0).unwrap();
        assert!(delta <= (-2.0f64).exp() * (1.0 + 1e-9));
        assert!((wall_gamma1(-3.0, delta).unwrap() - 4.0).abs() <= 1e-10);
    }

    #[test]
    fn delta_out_of_bracket() {
        assert!(matches!(solve_delta_sl3(0.5, -3.0), Err(Error::OutOfBracket { .. })));
        assert!(matches!(solve_delta_sl3(0.5, 1.0), Err(Error::Domain { .. })));
    }
}
