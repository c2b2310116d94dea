//! Spectral realization of the averaging operators.
//!
//! Each operator is a convolution by a bi-invariant probability measure on a
//! compact group, so on every irreducible representation it acts by a single
//! small matrix (a block), and its L2 operator norm is the supremum of the
//! block norms. Blocks are kept in structured form (scalar, diagonal, rank one)
//! so that sweeps up to cutoffs in the hundreds stay cheap.

pub mod irreps;
pub mod legendre;
pub mod sphere;

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};
use std::fmt::Write as _;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{d_theta_u2, u_theta_u2};

pub use irreps::{sym_power, u2_irrep_matrix, wigner_d, Spin, SymPowers, U2Irrep};
pub use legendre::{
    epsilon, interp_bound, interp_theta, legendre, theta_delta_eigs, theta_gap_norm, EpsilonParams,
};
pub use sphere::{
    lp_gap_lower_bound, quad_apply_theta, quad_theta_matrix, spectral_apply_theta, QuadMatrix, QuadResult,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpectralOperatorKind {
    /// Circle averaging on `S² = SO(3)/SO(2)`; acts on SO(3) irreps.
    ThetaDelta(f64),
    /// `∫∫ λ(r d_θ r') dr dr'` over real rotations in U(2).
    TTheta(f64),
    /// `(1/2π) ∫ λ(d_φ u_θ d_{−φ}) dφ` in U(2).
    STheta(f64),
}

impl SpectralOperatorKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralOperatorKind::ThetaDelta(d) if !(d.abs() <= 1.0) => Err(Error::Domain {
                name: "delta",
                value: d,
                expected: "|delta| <= 1",
            }),
            SpectralOperatorKind::TTheta(t) | SpectralOperatorKind::STheta(t) if !t.is_finite() => {
                Err(Error::Domain {
                    name: "theta",
                    value: t,
                    expected: "finite angle",
                })
            }
            _ => Ok(()),
        }
    }

    fn on_u2(&self) -> bool {
        !matches!(self, SpectralOperatorKind::ThetaDelta(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IrrepLabel {
    /// Integer spin `ℓ` of SO(3), dimension `2ℓ + 1`.
    So3(u32),
    U2(U2Irrep),
}

impl IrrepLabel {
    pub fn dim(&self) -> usize {
        match self {
            IrrepLabel::So3(l) => 2 * *l as usize + 1,
            IrrepLabel::U2(irrep) => irrep.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockData {
    Zero,
    /// Multiple of the identity.
    Scalar(Complex64),
    Diagonal(Vec<Complex64>),
    /// `coef · v v^*`.
    RankOne { coef: Complex64, v: DVector<Complex64> },
    Dense(DMatrix<Complex64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBlock {
    pub label: IrrepLabel,
    pub data: BlockData,
}

impl SpectralBlock {
    pub fn dim(&self) -> usize {
        self.label.dim()
    }

    pub fn matrix(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        match &self.data {
            BlockData::Zero => DMatrix::zeros(n, n),
            BlockData::Scalar(c) => DMatrix::identity(n, n) * *c,
            BlockData::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            BlockData::RankOne { coef, v } => v * v.adjoint() * *coef,
            BlockData::Dense(m) => m.clone(),
        }
    }

    /// Spectral norm.
    pub fn norm(&self) -> f64 {
        match &self.data {
            BlockData::Zero => 0.0,
            BlockData::Scalar(c) => c.norm(),
            BlockData::Diagonal(d) => d.iter().map(|z| z.norm()).fold(0.0, f64::max),
            BlockData::RankOne { coef, v } => coef.norm() * v.norm_squared(),
            BlockData::Dense(m) => m.clone().svd(false, false).singular_values.max(),
        }
    }

    /// `self − other` on the same irrep.
    pub fn sub(&self, other: &SpectralBlock) -> Result<SpectralBlock> {
        if self.label != other.label {
            return Err(Error::Shape {
                expected: self.dim(),
                rows: other.dim(),
                cols: other.dim(),
            });
        }
        use BlockData::*;
        let data = match (&self.data, &other.data) {
            (Zero, Zero) => Zero,
            (Scalar(a), Scalar(b)) => Scalar(a - b),
            (Diagonal(a), Diagonal(b)) => Diagonal(a.iter().zip(b).map(|(x, y)| x - y).collect()),
            (RankOne { coef: a, v }, RankOne { coef: b, v: w }) if v == w => RankOne { coef: a - b, v: v.clone() },
            _ => Dense(self.matrix() - other.matrix()),
        };
        Ok(SpectralBlock { label: self.label, data })
    }
}

/// `(1/√2) [[1, −i], [−i, 1]]`; conjugates real rotations to the diagonal torus.
fn rotation_diagonalizer() -> Matrix2<Complex64> {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let t = Complex64::new(0.0, -FRAC_1_SQRT_2);
    Matrix2::new(s, t, t, s)
}

/// Unit SO(2)-invariant vector of `Sym^m` (unique up to phase), present only for even `m`.
pub fn so2_invariant_vector(m: u32) -> Option<DVector<Complex64>> {
    if m % 2 == 1 {
        return None;
    }
    let pi = sym_power(&rotation_diagonalizer(), m);
    Some(pi.column(m as usize / 2).into_owned())
}

fn invariant_vectors(cutoff: u32) -> Vec<Option<DVector<Complex64>>> {
    SymPowers::new(rotation_diagonalizer())
        .take(cutoff as usize + 1)
        .enumerate()
        .map(|(m, pi)| (m % 2 == 0).then(|| pi.column(m / 2).into_owned()))
        .collect()
}

fn weight_phases(m: u32, theta: f64) -> impl Iterator<Item = Complex64> {
    (0..=m).map(move |a| Complex64::from_polar(1.0, (m as f64 - 2.0 * a as f64) * theta))
}

fn t_block_from_vector(irrep: U2Irrep, theta: f64, v: Option<&DVector<Complex64>>) -> SpectralBlock {
    let label = IrrepLabel::U2(irrep);
    let Some(v) = v else {
        return SpectralBlock { label, data: BlockData::Zero };
    };
    let det_k = d_theta_u2(theta).determinant().powi(irrep.k);
    let coef: Complex64 = v
        .iter()
        .zip(weight_phases(irrep.m, theta))
        .map(|(x, ph)| x.norm_sqr() * ph)
        .sum::<Complex64>()
        * det_k;
    SpectralBlock {
        label,
        data: BlockData::RankOne { coef, v: v.clone() },
    }
}

/// Block of `T_θ` on `det^k ⊗ Sym^m`: `P π(d_θ) P`, `P` the projection onto SO(2)-invariants.
pub fn t_theta_block(irrep: U2Irrep, theta: f64) -> SpectralBlock {
    t_block_from_vector(irrep, theta, so2_invariant_vector(irrep.m).as_ref())
}

fn diagonal_with_twist(pi: &DMatrix<Complex64>, det_k: Complex64) -> Vec<Complex64> {
    pi.diagonal().iter().map(|z| z * det_k).collect()
}

/// Block of `S_θ` on `det^k ⊗ Sym^m`: the weight-diagonal part of `π(u_θ)`.
pub fn s_theta_block(irrep: U2Irrep, theta: f64) -> SpectralBlock {
    let u = u_theta_u2(theta);
    let pi = sym_power(&u, irrep.m);
    SpectralBlock {
        label: IrrepLabel::U2(irrep),
        data: BlockData::Diagonal(diagonal_with_twist(&pi, u.determinant().powi(irrep.k))),
    }
}

/// Block of `Θ_δ` on spin `ℓ`: `P_ℓ(δ) · I`.
pub fn theta_delta_block(l: u32, delta: f64) -> SpectralBlock {
    SpectralBlock {
        label: IrrepLabel::So3(l),
        data: BlockData::Scalar(Complex64::new(legendre(l as usize, delta), 0.0)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub norm: f64,
    pub argmax: IrrepLabel,
    pub cutoff: u32,
    pub blocks: usize,
}

impl NormEstimate {
    fn fold(cutoff: u32, blocks: impl Iterator<Item = (IrrepLabel, f64)>) -> Self {
        let mut est = NormEstimate {
            norm: 0.0,
            argmax: IrrepLabel::So3(0),
            cutoff,
            blocks: 0,
        };
        for (label, n) in blocks {
            est.blocks += 1;
            if n > est.norm || est.blocks == 1 {
                est.norm = n;
                est.argmax = label;
            }
        }
        est
    }
}

impl BlockData {
    fn scaled(&self, c: Complex64) -> BlockData {
        match self {
            BlockData::Zero => BlockData::Zero,
            BlockData::Scalar(z) => BlockData::Scalar(z * c),
            BlockData::Diagonal(d) => BlockData::Diagonal(d.iter().map(|z| z * c).collect()),
            BlockData::RankOne { coef, v } => BlockData::RankOne { coef: coef * c, v: v.clone() },
            BlockData::Dense(m) => BlockData::Dense(m * c),
        }
    }
}

/// Block on `Sym^m` (or spin `ℓ`) together with the determinant whose `k`-th
/// power twists it into `det^k ⊗ Sym^m`.
struct TwistedBlock {
    base: SpectralBlock,
    det: Complex64,
}

impl TwistedBlock {
    fn at(&self, k: i32) -> SpectralBlock {
        let IrrepLabel::U2(irrep) = self.base.label else {
            return self.base.clone();
        };
        SpectralBlock {
            label: IrrepLabel::U2(U2Irrep { k, ..irrep }),
            data: self.base.data.scaled(self.det.powi(k)),
        }
    }
}

fn base_blocks(kind: SpectralOperatorKind, cutoff: u32) -> Vec<TwistedBlock> {
    let one = Complex64::new(1.0, 0.0);
    match kind {
        SpectralOperatorKind::ThetaDelta(d) => legendre::legendre_all(cutoff as usize, d)
            .into_iter()
            .enumerate()
            .map(|(l, e)| TwistedBlock {
                base: SpectralBlock {
                    label: IrrepLabel::So3(l as u32),
                    data: BlockData::Scalar(Complex64::new(e, 0.0)),
                },
                det: one,
            })
            .collect(),
        SpectralOperatorKind::TTheta(theta) => {
            let det = d_theta_u2(theta).determinant();
            invariant_vectors(cutoff)
                .iter()
                .enumerate()
                .map(|(m, v)| TwistedBlock {
                    base: t_block_from_vector(U2Irrep { k: 0, m: m as u32 }, theta, v.as_ref()),
                    det,
                })
                .collect()
        }
        SpectralOperatorKind::STheta(theta) => {
            let u = u_theta_u2(theta);
            SymPowers::new(u)
                .take(cutoff as usize + 1)
                .enumerate()
                .map(|(m, pi)| TwistedBlock {
                    base: SpectralBlock {
                        label: IrrepLabel::U2(U2Irrep { k: 0, m: m as u32 }),
                        data: BlockData::Diagonal(diagonal_with_twist(&pi, one)),
                    },
                    det: u.determinant(),
                })
                .collect()
        }
    }
}

fn twists(kind: SpectralOperatorKind, cutoff: u32) -> Vec<i32> {
    if kind.on_u2() {
        (-(cutoff as i32)..=cutoff as i32).collect()
    } else {
        vec![0]
    }
}

/// L2 operator norm of `kind`, as the supremum of block norms up to `cutoff`
/// (spin `ℓ ≤ cutoff` for SO(3); `|k|, m ≤ cutoff` for U(2)).
pub fn op_norm_l2(kind: SpectralOperatorKind, cutoff: u32) -> Result<NormEstimate> {
    kind.validate()?;
    let ks = twists(kind, cutoff);
    let mut norms = Vec::new();
    for tb in base_blocks(kind, cutoff) {
        for &k in &ks {
            let b = tb.at(k);
            norms.push((b.label, b.norm()));
        }
    }
    Ok(NormEstimate::fold(cutoff, norms.into_iter()))
}

/// L2 operator norm of `a − b` up to `cutoff`.
pub fn op_norm_l2_diff(a: SpectralOperatorKind, b: SpectralOperatorKind, cutoff: u32) -> Result<NormEstimate> {
    a.validate()?;
    b.validate()?;
    if a.on_u2() != b.on_u2() {
        return Err(Error::Domain {
            name: "operator pair",
            value: f64::NAN,
            expected: "both operators on the same group",
        });
    }
    let ks = twists(a, cutoff);
    let mut norms = Vec::new();
    for (x, y) in base_blocks(a, cutoff).iter().zip(&base_blocks(b, cutoff)) {
        for &k in &ks {
            let d = x.at(k).sub(&y.at(k))?;
            norms.push((d.label, d.norm()));
        }
    }
    Ok(NormEstimate::fold(cutoff, norms.into_iter()))
}

/// Least-squares slope of `ln norm` against `ln h`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 8 {
        return Err(Error::DegenerateFit("need at least 8 grid points"));
    }
    if points.iter().any(|&(h, n)| !(h > 0.0 && n > 0.0)) {
        return Err(Error::DegenerateFit("gaps and norms must be positive"));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-24 {
        return Err(Error::DegenerateFit("grid has no spread"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (a + (b - a) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

/// One-parameter operator families whose norm decay is fitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `‖T_{π/4 − h} − T_{π/4}‖`.
    TNearQuarterPi,
    /// `‖S_{base + h} − S_{base}‖`.
    SGap { base: f64 },
}

impl Family {
    pub fn operators(&self, h: f64) -> (SpectralOperatorKind, SpectralOperatorKind) {
        match *self {
            Family::TNearQuarterPi => (
                SpectralOperatorKind::TTheta(FRAC_PI_4 - h),
                SpectralOperatorKind::TTheta(FRAC_PI_4),
            ),
            Family::SGap { base } => (
                SpectralOperatorKind::STheta(base + h),
                SpectralOperatorKind::STheta(base),
            ),
        }
    }

    /// Grid used for exponent fits: 12 log-spaced gaps.
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            Family::TNearQuarterPi => log_grid(0.05, PI / 12.0, 12),
            Family::SGap { .. } => log_grid(0.1, 1.0, 12),
        }
    }

    /// Exponent of the L2 decay asserted for the family.
    pub fn nominal_exponent(&self) -> f64 {
        match self {
            Family::TNearQuarterPi => 0.5,
            Family::SGap { .. } => 0.25,
        }
    }
}

/// `(h, ‖A(h) − B‖_2)` for each gap.
pub fn family_points(family: Family, hs: &[f64], cutoff: u32) -> Result<Vec<(f64, f64)>> {
    hs.iter()
        .map(|&h| {
            let (a, b) = family.operators(h);
            op_norm_l2_diff(a, b, cutoff).map(|e| (h, e.norm))
        })
        .collect()
}

pub const FIT_CUTOFF: u32 = 128;

/// L2 constants observed on the default grids: the largest `norm / h^e` with
/// `e` the nominal exponent, at cutoff [`FIT_CUTOFF`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedL2Constants {
    pub t_constant: f64,
    pub t_exponent: f64,
    pub s_constant: f64,
    pub s_exponent: f64,
}

pub fn fit_l2_constants(cutoff: u32) -> Result<FittedL2Constants> {
    let fit = |family: Family| -> Result<(f64, f64)> {
        let pts = family_points(family, &family.default_grid(), cutoff)?;
        let e = family.nominal_exponent();
        let c = pts.iter().map(|(h, n)| n / h.powf(e)).fold(0.0, f64::max);
        Ok((c, fit_exponent(&pts)?))
    };
    let (t_constant, t_exponent) = fit(Family::TNearQuarterPi)?;
    let (s_constant, s_exponent) = fit(Family::SGap { base: 0.3 })?;
    Ok(FittedL2Constants { t_constant, t_exponent, s_constant, s_exponent })
}

pub fn fitted_l2_constants() -> &'static FittedL2Constants {
    static CELL: OnceLock<FittedL2Constants> = OnceLock::new();
    CELL.get_or_init(|| fit_l2_constants(FIT_CUTOFF).expect("default grids are well formed"))
}

/// Safety factor applied to the observed L2 constants.
pub const SP2_SAFETY_FACTOR: f64 = 2.0;

/// Default Sp(2,R) constants `(C1, C2)` at exponent `p ≥ 2`.
///
/// The L2 bound `C h^e` is interpolated against the trivial `L∞` bound 2,
/// giving `C^{2/p} 2^{1−2/p} h^{2e/p}`.
pub fn sp2_default_constants(p: f64) -> Result<(f64, f64)> {
    if !(p >= 2.0) || p.is_infinite() {
        return Err(Error::Domain {
            name: "p",
            value: p,
            expected: "2 <= p < inf",
        });
    }
    let fitted = fitted_l2_constants();
    let lift = |c: f64| (SP2_SAFETY_FACTOR * c).powf(2.0 / p) * 2f64.powf(1.0 - 2.0 / p);
    Ok((lift(fitted.t_constant), lift(fitted.s_constant)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: f64,
    pub bound: f64,
    pub computed_norm: f64,
    pub cutoff: u32,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("parameter,bound,computed_norm,cutoff\n");
    for r in rows {
        let _ = writeln!(out, "{:.17e},{:.17e},{:.17e},{}", r.parameter, r.bound, r.computed_norm, r.cutoff);
    }
    out
}

/// `‖Θ_δ − Θ_0‖_2` against `4 |δ|^{1/2}`.
pub fn theta_delta_sweep(deltas: &[f64], cutoff: u32) -> Result<Vec<SweepRow>> {
    deltas
        .iter()
        .map(|&d| {
            Ok(SweepRow {
                parameter: d,
                bound: 4.0 * d.abs().sqrt(),
                computed_norm: theta_gap_norm(d, cutoff as usize)?,
                cutoff,
            })
        })
        .collect()
}

/// A family sweep against the fitted L2 bound `SP2_SAFETY_FACTOR · C · h^e`.
pub fn family_sweep(family: Family, hs: &[f64], cutoff: u32) -> Result<Vec<SweepRow>> {
    let fitted = fitted_l2_constants();
    let c = match family {
        Family::TNearQuarterPi => fitted.t_constant,
        Family::SGap { .. } => fitted.s_constant,
    };
    let e = family.nominal_exponent();
    Ok(family_points(family, hs, cutoff)?
        .into_iter()
        .map(|(h, n)| SweepRow {
            parameter: h,
            bound: SP2_SAFETY_FACTOR * c * h.powf(e),
            computed_norm: n,
            cutoff,
        })
        .collect())
}
