//! Elements of SL(3,R), Sp(2,R) and their maximal compact subgroups.
//!
//! A [`GroupElement`] is a real square matrix carrying the tag of the group it
//! was validated against. SO(3) sits inside SL(3,R); the embedded copy of U(2)
//! (matrices `[[A, -B], [B, A]]` with `A + iB` unitary) sits inside Sp(2,R).
//!
//! Membership residuals are measured relative to the natural rounding scale of
//! the defining identity, so that large but honestly computed elements such as
//! `k D(10, 0, -10) k'` are not rejected for floating point noise.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use nalgebra::{DMatrix, Matrix2, Matrix3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for matrices handed in from outside the library.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Tolerance guaranteed for matrices built by the constructors below.
pub const INTERNAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupTag {
    #[serde(rename = "sl3")]
    Sl3,
    #[serde(rename = "sp2")]
    Sp2,
    #[serde(rename = "so3")]
    So3,
    #[serde(rename = "u2")]
    U2Emb,
}

impl GroupTag {
    pub fn dim(self) -> usize {
        match self {
            GroupTag::Sl3 | GroupTag::So3 => 3,
            GroupTag::Sp2 | GroupTag::U2Emb => 4,
        }
    }

    /// The noncompact group containing this one.
    pub fn ambient(self) -> GroupTag {
        match self {
            GroupTag::Sl3 | GroupTag::So3 => GroupTag::Sl3,
            GroupTag::Sp2 | GroupTag::U2Emb => GroupTag::Sp2,
        }
    }

    pub fn is_compact(self) -> bool {
        matches!(self, GroupTag::So3 | GroupTag::U2Emb)
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GroupTag::Sl3 => "SL(3,R)",
            GroupTag::Sp2 => "Sp(2,R)",
            GroupTag::So3 => "SO(3)",
            GroupTag::U2Emb => "U(2)",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    tag: GroupTag,
    mat: DMatrix<f64>,
}

impl GroupElement {
    /// Validates `mat` against `tag` at [`MEMBERSHIP_TOL`].
    pub fn new(tag: GroupTag, mat: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(tag, mat, MEMBERSHIP_TOL)
    }

    pub fn with_tolerance(tag: GroupTag, mat: DMatrix<f64>, tolerance: f64) -> Result<Self> {
        let n = tag.dim();
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Shape {
                expected: n,
                rows: mat.nrows(),
                cols: mat.ncols(),
            });
        }
        let residual = membership_residual(tag, &mat);
        if residual.is_nan() || residual > tolerance {
            return Err(Error::NotInGroup {
                tag,
                residual,
                tolerance,
            });
        }
        Ok(Self { tag, mat })
    }

    /// Wraps a matrix the library built itself.
    pub(crate) fn trusted(tag: GroupTag, mat: DMatrix<f64>) -> Self {
        debug_assert_eq!(mat.nrows(), tag.dim());
        Self { tag, mat }
    }

    pub fn identity(tag: GroupTag) -> Self {
        Self::trusted(tag, DMatrix::identity(tag.dim(), tag.dim()))
    }

    pub fn tag(&self) -> GroupTag {
        self.tag
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.mat
    }

    pub fn residual(&self) -> f64 {
        membership_residual(self.tag, &self.mat)
    }

    /// Re-tags the element as a member of its ambient noncompact group.
    pub fn into_ambient(self) -> Self {
        Self {
            tag: self.tag.ambient(),
            mat: self.mat,
        }
    }

    /// Product in the smallest group containing both factors.
    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.tag.ambient() != other.tag.ambient() {
            return Err(Error::MixedGroups(self.tag, other.tag));
        }
        let tag = if self.tag == other.tag {
            self.tag
        } else {
            self.tag.ambient()
        };
        Ok(Self::trusted(tag, &self.mat * &other.mat))
    }

    /// `g^{-1}`; exact formulas per group (adjugate for SL(3), `J^{-1} g^T J` for Sp(2)).
    pub fn inverse(&self) -> GroupElement {
        let mat = match self.tag {
            GroupTag::So3 | GroupTag::U2Emb => self.mat.transpose(),
            GroupTag::Sl3 => {
                let m3 = to_matrix3(&self.mat);
                let det = m3.determinant();
                DMatrix::from_iterator(3, 3, (cofactor3(&m3).transpose() / det).iter().copied())
            }
            GroupTag::Sp2 => {
                let j = symplectic_form();
                j.transpose() * self.mat.transpose() * j
            }
        };
        Self::trusted(self.tag, mat)
    }

    pub fn transpose(&self) -> GroupElement {
        Self::trusted(self.tag, self.mat.transpose())
    }
}

/// Scaled residual of the defining identity of `tag`.
pub fn membership_residual(tag: GroupTag, mat: &DMatrix<f64>) -> f64 {
    let n = tag.dim();
    if mat.nrows() != n || mat.ncols() != n {
        return f64::INFINITY;
    }
    let scale = mat.amax().max(1.0);
    match tag {
        GroupTag::Sl3 => (mat.determinant() - 1.0).abs() / scale.powi(3),
        GroupTag::So3 => {
            let orth = (mat.transpose() * mat - DMatrix::identity(3, 3)).amax();
            if mat.determinant() <= 0.0 {
                f64::INFINITY
            } else {
                orth
            }
        }
        GroupTag::Sp2 => {
            let j = symplectic_form();
            (mat.transpose() * &j * mat - j).amax() / (scale * scale)
        }
        GroupTag::U2Emb => {
            let orth = (mat.transpose() * mat - DMatrix::identity(4, 4)).amax();
            orth.max(u2_block_deviation(mat))
        }
    }
}

/// Deviation from the block pattern `[[A, -B], [B, A]]`.
pub fn u2_block_deviation(mat: &DMatrix<f64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            dev = dev.max((mat[(i, j)] - mat[(i + 2, j + 2)]).abs());
            dev = dev.max((mat[(i + 2, j)] + mat[(i, j + 2)]).abs());
        }
    }
    dev
}

/// The standard symplectic form `[[0, I], [-I, 0]]`.
pub fn symplectic_form() -> DMatrix<f64> {
    let mut j = DMatrix::zeros(4, 4);
    j[(0, 2)] = 1.0;
    j[(1, 3)] = 1.0;
    j[(2, 0)] = -1.0;
    j[(3, 1)] = -1.0;
    j
}

pub(crate) fn to_matrix3(m: &DMatrix<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[(i, j)])
}

/// Cofactor matrix, `det(m) * m^{-T}`. Entries are 2x2 minors, so graded
/// matrices keep their componentwise accuracy.
pub(crate) fn cofactor3(m: &Matrix3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        let minor = m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])];
        if (i + j) % 2 == 0 {
            minor
        } else {
            -minor
        }
    })
}

fn diag(tag: GroupTag, entries: &[f64]) -> GroupElement {
    GroupElement::trusted(tag, DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
}

/// Rotation in the (1,2)-plane with cosine `delta`.
pub fn k_delta(delta: f64) -> Result<GroupElement> {
    if !(-1.0..=1.0).contains(&delta) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            expected: "|delta| <= 1",
        });
    }
    let s = (1.0 - delta * delta).sqrt();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(3, 3, &[
        delta, -s, 0.0,
        s, delta, 0.0,
        0.0, 0.0, 1.0,
    ]);
    Ok(GroupElement::trusted(GroupTag::So3, m))
}

/// Rotation by `theta` in the (2,3)-plane, fixing `e1`.
pub fn u_circle(theta: f64) -> GroupElement {
    let (s, c) = theta.sin_cos();
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(3, 3, &[
        1.0, 0.0, 0.0,
        0.0, c, -s,
        0.0, s, c,
    ]);
    GroupElement::trusted(GroupTag::So3, m)
}

/// `diag(e^r, e^s, e^t)`; the exponents must sum to zero.
pub fn d_rst(r: f64, s: f64, t: f64) -> Result<GroupElement> {
    let sum = r + s + t;
    if sum.abs() > INTERNAL_TOL * (1.0 + r.abs() + s.abs() + t.abs()) {
        return Err(Error::SumNotZero(sum));
    }
    Ok(diag(GroupTag::Sl3, &[r.exp(), s.exp(), t.exp()]))
}

/// `diag(e^a, e^{-a/2}, e^{-a/2})`, which commutes with [`u_circle`].
pub fn d_a_sl3(a: f64) -> GroupElement {
    diag(GroupTag::Sl3, &[a.exp(), (-a / 2.0).exp(), (-a / 2.0).exp()])
}

fn unitary_residual(u: &Matrix2<Complex64>) -> f64 {
    (u.adjoint() * u - Matrix2::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Embeds `A + iB` as `[[A, -B], [B, A]]`.
pub fn embed_u2(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Result<GroupElement> {
    let u = Matrix2::from_fn(|i, j| Complex64::new(a[(i, j)], b[(i, j)]));
    embed_unitary(&u)
}

pub fn embed_unitary(u: &Matrix2<Complex64>) -> Result<GroupElement> {
    let residual = unitary_residual(u);
    if residual > MEMBERSHIP_TOL {
        return Err(Error::NonUnitary(residual));
    }
    Ok(embed_unchecked(u))
}

pub(crate) fn embed_unchecked(u: &Matrix2<Complex64>) -> GroupElement {
    let mut m = DMatrix::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            let z = u[(i, j)];
            m[(i, j)] = z.re;
            m[(i + 2, j + 2)] = z.re;
            m[(i, j + 2)] = -z.im;
            m[(i + 2, j)] = z.im;
        }
    }
    GroupElement::trusted(GroupTag::U2Emb, m)
}

/// Inverse of [`embed_u2`]; `None` if `g` is not an embedded U(2) element.
pub fn extract_u2(g: &GroupElement) -> Option<Matrix2<Complex64>> {
    if g.tag() != GroupTag::U2Emb {
        return None;
    }
    let m = g.matrix();
    Some(Matrix2::from_fn(|i, j| Complex64::new(m[(i, j)], m[(i + 2, j)])))
}

pub fn d_theta_u2(theta: f64) -> Matrix2<Complex64> {
    let z = Complex64::from_polar(1.0, theta);
    Matrix2::new(z, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), z.conj())
}

pub fn u_theta_u2(theta: f64) -> Matrix2<Complex64> {
    let z = Complex64::from_polar(FRAC_1_SQRT_2, theta);
    let one = Complex64::new(FRAC_1_SQRT_2, 0.0);
    Matrix2::new(z, -one, one, z.conj())
}

pub fn v_u2() -> Matrix2<Complex64> {
    let z = Complex64::new(FRAC_1_SQRT_2, FRAC_1_SQRT_2);
    Matrix2::new(z, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), z)
}

/// `diag(e^{iθ}, e^{-iθ})` pushed into Sp(2,R).
pub fn d_theta(theta: f64) -> GroupElement {
    embed_unchecked(&d_theta_u2(theta))
}

pub fn u_theta(theta: f64) -> GroupElement {
    embed_unchecked(&u_theta_u2(theta))
}

/// The central element `(1+i)/√2 · I`.
pub fn v_elem() -> GroupElement {
    embed_unchecked(&v_u2())
}

pub fn d_beta_gamma(beta: f64, gamma: f64) -> GroupElement {
    diag(
        GroupTag::Sp2,
        &[beta.exp(), gamma.exp(), (-beta).exp(), (-gamma).exp()],
    )
}

/// `diag(e^a, 1, e^{-a}, 1)`.
pub fn d_a_sp2(a: f64) -> GroupElement {
    diag(GroupTag::Sp2, &[a.exp(), 1.0, (-a).exp(), 1.0])
}

/// `diag(e^a, e^a, e^{-a}, e^{-a})`.
pub fn d_a_prime(a: f64) -> GroupElement {
    diag(GroupTag::Sp2, &[a.exp(), a.exp(), (-a).exp(), (-a).exp()])
}

/// Largest singular value.
pub fn operator_norm(g: &GroupElement) -> f64 {
    g.matrix().clone().svd(false, false).singular_values.max()
}

/// Haar-distributed samples of SO(3) and U(2), one independent stream per seed.
#[derive(Clone, Debug)]
pub struct HaarSampler {
    rng: ChaCha8Rng,
}

impl HaarSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for worker `index` of a run seeded with `seed`.
    pub fn for_worker(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index + 1);
        Self { rng }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn so3(&mut self) -> GroupElement {
        // Gram-Schmidt on Gaussian columns is QR with positive diagonal R.
        let mut cols: Vec<[f64; 3]> = Vec::with_capacity(3);
        while cols.len() < 3 {
            let mut v = [self.normal(), self.normal(), self.normal()];
            for q in &cols {
                let dot: f64 = (0..3).map(|i| v[i] * q[i]).sum();
                for i in 0..3 {
                    v[i] -= dot * q[i];
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-8 {
                continue;
            }
            cols.push([v[0] / norm, v[1] / norm, v[2] / norm]);
        }
        let mut m = DMatrix::from_fn(3, 3, |i, j| cols[j][i]);
        if m.determinant() < 0.0 {
            m.column_mut(0).neg_mut();
        }
        GroupElement::trusted(GroupTag::So3, m)
    }

    pub fn u2_matrix(&mut self) -> Matrix2<Complex64> {
        let mut cols: Vec<[Complex64; 2]> = Vec::with_capacity(2);
        while cols.len() < 2 {
            let mut v = [
                Complex64::new(self.normal(), self.normal()),
                Complex64::new(self.normal(), self.normal()),
            ];
            for q in &cols {
                let dot = q[0].conj() * v[0] + q[1].conj() * v[1];
                v[0] -= dot * q[0];
                v[1] -= dot * q[1];
            }
            let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            if norm < 1e-8 {
                continue;
            }
            cols.push([v[0] / norm, v[1] / norm]);
        }
        Matrix2::new(cols[0][0], cols[1][0], cols[0][1], cols[1][1])
    }

    pub fn u2(&mut self) -> GroupElement {
        embed_unchecked(&self.u2_matrix())
    }

    /// Haar sample of the maximal compact subgroup of `tag`'s ambient group.
    pub fn compact(&mut self, tag: GroupTag) -> GroupElement {
        match tag.ambient() {
            GroupTag::Sl3 => self.so3(),
            _ => self.u2(),
        }
    }
}

pub fn haar_so3(seed: u64) -> GroupElement {
    HaarSampler::new(seed).so3()
}

pub fn haar_u2(seed: u64) -> GroupElement {
    HaarSampler::new(seed).u2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).amax() <= tol
    }

    #[test]
    fn k_delta_examples() {
        assert!(close(k_delta(1.0).unwrap().matrix(), &DMatrix::identity(3, 3), 0.0));
        let k0 = k_delta(0.0).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(close(k0.matrix(), &expect, 1e-15));
        let k = k_delta(0.6).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[0.6, -0.8, 0.0, 0.8, 0.6, 0.0, 0.0, 0.0, 1.0]);
        assert!(close(k.matrix(), &expect, 1e-15));
        assert!(matches!(k_delta(1.2), Err(Error::Domain { .. })));
    }

    #[test]
    fn u_circle_examples() {
        assert!(close(u_circle(0.0).matrix(), &DMatrix::identity(3, 3), 0.0));
        let flip = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, -1.0]));
        assert!(close(u_circle(PI).matrix(), &flip, 1e-15));
        let q = u_circle(FRAC_PI_2);
        let m = q.matrix();
        assert!((m[(2, 1)] - 1.0).abs() < 1e-15 && (m[(1, 2)] + 1.0).abs() < 1e-15);
        assert!((m[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_families() {
        assert!(close(d_rst(0.0, 0.0, 0.0).unwrap().matrix(), &DMatrix::identity(3, 3), 0.0));
        let d = d_rst(1.0, 0.5, -1.5).unwrap();
        assert!((d.matrix()[(0, 0)] - 1f64.exp()).abs() < 1e-15);
        assert!((d.matrix()[(2, 2)] - (-1.5f64).exp()).abs() < 1e-15);
        assert!(close(d_rst(2.0, -1.0, -1.0).unwrap().matrix(), d_a_sl3(2.0).matrix(), 1e-15));
        assert!(matches!(d_rst(1.0, 1.0, 1.0), Err(Error::SumNotZero(_))));
        assert!(close(d_a_sl3(0.0).matrix(), &DMatrix::identity(3, 3), 0.0));
        let d1 = d_a_sl3(1.0);
        assert!((d1.matrix()[(1, 1)] - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn d_a_commutes_with_circle() {
        for &a in &[0.3, 1.0, 2.5] {
            for &th in &[0.1, 1.3, 2.9] {
                let lhs = d_a_sl3(a).mul(&u_circle(th)).unwrap();
                let rhs = u_circle(th).mul(&d_a_sl3(a)).unwrap();
                assert!(close(lhs.matrix(), rhs.matrix(), 1e-14));
            }
        }
    }

    #[test]
    fn embed_examples() {
        let id = embed_u2(&Matrix2::identity(), &Matrix2::zeros()).unwrap();
        assert!(close(id.matrix(), &DMatrix::identity(4, 4), 0.0));
        let j = embed_u2(&Matrix2::zeros(), &Matrix2::identity()).unwrap();
        #[rustfmt::skip]
        let expect = DMatrix::from_row_slice(4, 4, &[
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
        ]);
        assert!(close(j.matrix(), &expect, 0.0));
        let bad = embed_u2(&Matrix2::new(2.0, 0.0, 0.0, 1.0), &Matrix2::zeros());
        assert!(matches!(bad, Err(Error::NonUnitary(_))));
        let d = d_theta(0.7);
        assert!(membership_residual(GroupTag::Sp2, d.matrix()) < INTERNAL_TOL);
        assert!(membership_residual(GroupTag::U2Emb, d.matrix()) < INTERNAL_TOL);
    }

    #[test]
    fn named_u2_elements() {
        assert!(close(d_theta(0.0).matrix(), &DMatrix::identity(4, 4), 0.0));
        let u0 = extract_u2(&u_theta(0.0)).unwrap();
        let s = FRAC_1_SQRT_2;
        assert!((u0[(0, 0)].re - s).abs() < 1e-15 && (u0[(0, 1)].re + s).abs() < 1e-15);
        assert!((u0[(1, 0)].re - s).abs() < 1e-15 && (u0[(1, 1)].re - s).abs() < 1e-15);
        let v2 = v_elem().mul(&v_elem()).unwrap();
        let i2 = Matrix2::new(
            Complex64::i(),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::i(),
        );
        assert!(close(v2.matrix(), embed_unitary(&i2).unwrap().matrix(), 1e-15));
    }

    #[test]
    fn sp2_diagonals() {
        assert!(close(d_beta_gamma(0.0, 0.0).matrix(), &DMatrix::identity(4, 4), 0.0));
        let e = 1f64.exp();
        let dp = d_a_prime(1.0);
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![e, e, 1.0 / e, 1.0 / e]));
        assert!(close(dp.matrix(), &expect, 1e-15));
        let j = symplectic_form();
        for g in [d_beta_gamma(3.0, 1.0), d_a_sp2(2.0), d_a_prime(1.5)] {
            let m = g.matrix();
            assert!((m.transpose() * &j * m - &j).amax() < 1e-13);
        }
    }

    #[test]
    fn operator_norm_examples() {
        assert!((operator_norm(&GroupElement::identity(GroupTag::Sl3)) - 1.0).abs() < 1e-15);
        let d = d_rst(2.0, -1.0, -1.0).unwrap();
        assert!((operator_norm(&d) / 2f64.exp() - 1.0).abs() < 1e-14);
        assert!((operator_norm(&k_delta(0.3).unwrap()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn raw_matrix_validation() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5, 1.0]));
        assert!(GroupElement::new(GroupTag::Sl3, m.clone()).is_ok());
        assert!(GroupElement::new(GroupTag::So3, m).is_err());
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0, 1.0]));
        assert!(matches!(
            GroupElement::new(GroupTag::Sl3, bad),
            Err(Error::NotInGroup { .. })
        ));
        assert!(matches!(
            GroupElement::new(GroupTag::Sp2, DMatrix::identity(3, 3)),
            Err(Error::Shape { .. })
        ));
        let reflection = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0, 1.0]));
        assert!(GroupElement::new(GroupTag::So3, reflection).is_err());
    }

    #[test]
    fn mixed_products_rejected() {
        let a = d_a_sl3(1.0);
        let b = d_a_prime(1.0);
        assert!(matches!(a.mul(&b), Err(Error::MixedGroups(_, _))));
        let c = u_circle(0.2).mul(&k_delta(0.5).unwrap()).unwrap();
        assert_eq!(c.tag(), GroupTag::So3);
        assert_eq!(u_circle(0.2).mul(&a).unwrap().tag(), GroupTag::Sl3);
    }

    #[test]
    fn samplers_are_members_and_reproducible() {
        let mut s = HaarSampler::new(7);
        for _ in 0..200 {
            assert!(s.so3().residual() < INTERNAL_TOL);
            assert!(s.u2().residual() < INTERNAL_TOL);
        }
        assert_eq!(haar_so3(11), haar_so3(11));
        assert_eq!(haar_u2(11), haar_u2(11));
        assert_ne!(haar_so3(11), haar_so3(12));
        let mut w0 = HaarSampler::for_worker(5, 0);
        let mut w1 = HaarSampler::for_worker(5, 1);
        assert_ne!(w0.so3(), w1.so3());
    }

    #[test]
    fn inverses() {
        let mut s = HaarSampler::new(3);
        let g = s.so3().mul(&d_rst(1.5, 0.2, -1.7).unwrap()).unwrap().mul(&s.so3()).unwrap();
        let prod = g.mul(&g.inverse()).unwrap();
        assert!(close(prod.matrix(), &DMatrix::identity(3, 3), 1e-12));
        let h = s.u2().mul(&d_beta_gamma(2.0, 0.5)).unwrap().mul(&s.u2()).unwrap();
        let prod = h.mul(&h.inverse()).unwrap();
        assert!(close(prod.matrix(), &DMatrix::identity(4, 4), 1e-12));
        let lu = h.matrix().clone().try_inverse().unwrap();
        assert!(close(h.inverse().matrix(), &lu, 1e-10));
    }
}
