//! Irreducible representations of U(2) and SU(2) in the weight basis.
//!
//! `Sym^m(U)` acts on homogeneous polynomials of degree `m` in the orthonormal
//! basis `e_a ∝ x^{m−a} y^a`. Matrices are built level by level with a
//! recursion in which every level is an isometric compression of the previous
//! one tensored with `U`, which keeps the result unitary to rounding at
//! `m` in the hundreds.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Twice an SU(2) spin, so that half-integer spins stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Spin(pub u32);

impl Spin {
    pub fn integer(l: u32) -> Self {
        Spin(2 * l)
    }

    pub fn two_j(self) -> u32 {
        self.0
    }

    pub fn dim(self) -> usize {
        self.0 as usize + 1
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

/// `det^k ⊗ Sym^m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct U2Irrep {
    pub k: i32,
    pub m: u32,
}

impl U2Irrep {
    pub fn dim(self) -> usize {
        self.m as usize + 1
    }
}

/// Successive symmetric powers `Sym^0(U), Sym^1(U), …`.
pub struct SymPowers {
    u: Matrix2<Complex64>,
    current: DMatrix<Complex64>,
    m: u32,
}

impl SymPowers {
    pub fn new(u: Matrix2<Complex64>) -> Self {
        Self {
            u,
            current: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            m: 0,
        }
    }

    fn advance(&mut self) {
        let m = self.m as usize + 1;
        let prev = &self.current;
        let u = &self.u;
        let mf = m as f64;
        let next = DMatrix::from_fn(m + 1, m + 1, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            if a < m && b < m {
                acc += u[(0, 0)] * prev[(a, b)] * (((m - a) * (m - b)) as f64).sqrt();
            }
            if a < m && b > 0 {
                acc += u[(0, 1)] * prev[(a, b - 1)] * (((m - a) * b) as f64).sqrt();
            }
            if a > 0 && b < m {
                acc += u[(1, 0)] * prev[(a - 1, b)] * ((a * (m - b)) as f64).sqrt();
            }
            if a > 0 && b > 0 {
                acc += u[(1, 1)] * prev[(a - 1, b - 1)] * ((a * b) as f64).sqrt();
            }
            acc / mf
        });
        self.current = next;
        self.m += 1;
    }
}

impl Iterator for SymPowers {
    type Item = DMatrix<Complex64>;

    fn next(&mut self) -> Option<Self::Item> {
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

/// `Sym^m(U)`.
pub fn sym_power(u: &Matrix2<Complex64>, m: u32) -> DMatrix<Complex64> {
    SymPowers::new(*u).nth(m as usize).expect("iterator is infinite")
}

/// `det(U)^k Sym^m(U)`.
pub fn u2_irrep_matrix(irrep: U2Irrep, u: &Matrix2<Complex64>) -> DMatrix<Complex64> {
    let det = u.determinant();
    sym_power(u, irrep.m) * det.powi(irrep.k)
}

/// Rotation `exp(−iβ σ_y / 2)` in SU(2).
pub fn su2_rotation_y(beta: f64) -> Matrix2<Complex64> {
    let (s, c) = (beta / 2.0).sin_cos();
    Matrix2::new(
        Complex64::new(c, 0.0),
        Complex64::new(-s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(c, 0.0),
    )
}

/// Wigner small-d matrix `d^j(β)`; row/column `a` carries weight `j − a`.
pub fn wigner_d(spin: Spin, beta: f64) -> DMatrix<f64> {
    sym_power(&su2_rotation_y(beta), spin.two_j()).map(|z| z.re)
}

/// Max entry of `A^* A − I`.
pub fn unitarity_defect(a: &DMatrix<Complex64>) -> f64 {
    let n = a.nrows();
    (a.adjoint() * a - DMatrix::<Complex64>::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
