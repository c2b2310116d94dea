//! Test multipliers, their bi-K averages, the measures `m_g` and the
//! obstruction demonstration along escaping diagonal rays.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{
    constants_sp2_default, plan_path_sl3, plan_path_sp2, ConstantsTable, StepTag,
};
use crate::error::{Error, Result};
use crate::groups::{
    d_a_sl3, d_beta_gamma, d_rst, k_delta, operator_norm, GroupElement, GroupTag, HaarSampler,
};
use crate::kak::{chamber, ChamberPoint, ChamberPointSL3, ChamberPointSp2};
use crate::spectra::{epsilon, EpsilonParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MultiplierKind {
    Constant(f64),
    /// `⟨π(g)ξ, ξ⟩` for the unit Gaussian `ξ` under the volume-preserving
    /// action on square-integrable functions of the ambient vector space.
    GaussianCoefficient,
    /// `max(0, 1 − ln‖g‖ / ln R)`, supported in `‖g‖ < R`.
    CompactBump { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestMultiplier {
    pub kind: MultiplierKind,
    /// Known bound on the p-cb multiplier norm; `None` for value-only test functions.
    pub asserted_pcb_norm_bound: Option<f64>,
    pub provenance: String,
}

impl TestMultiplier {
    pub fn constant(c: f64) -> Self {
        Self {
            kind: MultiplierKind::Constant(c),
            asserted_pcb_norm_bound: Some(c.abs()),
            provenance: "constant function, trivial one-dimensional representation".into(),
        }
    }

    pub fn gaussian() -> Self {
        Self {
            kind: MultiplierKind::GaussianCoefficient,
            asserted_pcb_norm_bound: Some(1.0),
            provenance: "coefficient of an isometric Hilbert-space representation at a unit vector".into(),
        }
    }

    pub fn bump(radius: f64) -> Result<Self> {
        if !(radius > 1.0) || !radius.is_finite() {
            return Err(Error::Domain {
                name: "radius",
                value: radius,
                expected: "1 < R < inf",
            });
        }
        Ok(Self {
            kind: MultiplierKind::CompactBump { radius },
            asserted_pcb_norm_bound: None,
            provenance: "compactly supported radial profile; no multiplier norm asserted".into(),
        })
    }

    pub fn eval(&self, g: &GroupElement) -> Result<f64> {
        match self.kind {
            MultiplierKind::Constant(c) => Ok(c),
            MultiplierKind::GaussianCoefficient => gaussian_phi(g),
            MultiplierKind::CompactBump { radius } => Ok(bump_profile(operator_norm(g), radius)),
        }
    }

    /// Value at a chamber point, i.e. at `D(P)`.
    pub fn eval_chamber(&self, point: &ChamberPoint) -> f64 {
        match self.kind {
            MultiplierKind::Constant(c) => c,
            MultiplierKind::GaussianCoefficient => gaussian_phi_chamber(point),
            MultiplierKind::CompactBump { radius } => {
                let log_norm = match point {
                    ChamberPoint::Sl3(p) => p.r,
                    ChamberPoint::Sp2(p) => p.beta,
                };
                bump_profile(log_norm.exp(), radius)
            }
        }
    }
}

pub fn bump_profile(norm: f64, radius: f64) -> f64 {
    (1.0 - norm.ln() / radius.ln()).max(0.0)
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

pub fn gaussian_phi_chamber(point: &ChamberPoint) -> f64 {
    match point {
        ChamberPoint::Sl3(p) => (-0.5 * (ln_cosh(p.r) + ln_cosh(p.s) + ln_cosh(p.t))).exp(),
        ChamberPoint::Sp2(p) => (-(ln_cosh(p.beta) + ln_cosh(p.gamma))).exp(),
    }
}

/// SL(3): `∏ cosh(γ_i)^{-1/2}`; Sp(2): `(cosh β cosh γ)^{-1}`.
pub fn gaussian_phi(g: &GroupElement) -> Result<f64> {
    if g.tag().is_compact() {
        return Ok(1.0);
    }
    Ok(gaussian_phi_chamber(&chamber(g)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: f64,
    /// Monte Carlo standard error; zero for closed forms.
    pub mc_error_estimate: f64,
}

impl PairingResult {
    pub fn exact(value: f64) -> Self {
        Self { value, mc_error_estimate: 0.0 }
    }
}

pub enum Integrand<'a> {
    /// Bi-K-invariant, evaluated exactly.
    Multiplier(&'a TestMultiplier),
    Function(&'a (dyn Fn(&GroupElement) -> f64 + Sync)),
}

const WORKERS: u64 = 4;

/// Mean and standard error of `sample(rng)` over `n` draws, split over
/// fixed per-worker streams so the result does not depend on scheduling.
fn monte_carlo<F>(n: usize, seed: u64, sample: F) -> PairingResult
where
    F: Fn(&mut HaarSampler) -> f64 + Sync,
{
    let chunks: Vec<(f64, f64, usize)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..WORKERS)
            .map(|w| {
                let len = n / WORKERS as usize + usize::from((w as usize) < n % WORKERS as usize);
                let sample = &sample;
                scope.spawn(move || {
                    let mut h = HaarSampler::for_worker(seed, w);
                    let (mut sum, mut sum_sq) = (0.0, 0.0);
                    for _ in 0..len {
                        let v = sample(&mut h);
                        sum += v;
                        sum_sq += v * v;
                    }
                    (sum, sum_sq, len)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampler panicked")).collect()
    });
    let (sum, sum_sq, count) = chunks
        .iter()
        .fold((0.0, 0.0, 0usize), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let nf = count as f64;
    let mean = sum / nf;
    let var = if count > 1 { ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    PairingResult { value: mean, mc_error_estimate: (var / nf).sqrt() }
}

/// `∫_K ∫_K φ(k g k')`.
pub fn phi_tilde(phi: Integrand<'_>, g: &GroupElement, n_samples: usize, seed: u64) -> Result<PairingResult> {
    match phi {
        Integrand::Multiplier(m) => {
            let point = chamber(&g.clone().into_ambient())?;
            Ok(PairingResult::exact(m.eval_chamber(&point)))
        }
        Integrand::Function(f) => {
            if n_samples == 0 {
                return Err(Error::Domain {
                    name: "samples",
                    value: 0.0,
                    expected: "at least one sample",
                });
            }
            let tag = g.tag().ambient();
            Ok(monte_carlo(n_samples, seed, |h| {
                let (k, k2) = (h.compact(tag), h.compact(tag));
                let x = product(&[&k, g, &k2]);
                f(&x)
            }))
        }
    }
}

/// `⟨m_g, φ⟩ = φ̃(g)`.
pub fn m_pairing(g: &GroupElement, phi: &TestMultiplier) -> Result<PairingResult> {
    phi_tilde(Integrand::Multiplier(phi), g, 0, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaDrstCheck {
    pub point: ChamberPointSL3,
    /// Chamber point of `D_{-t} k_0 D_{-t}`.
    pub wall_point: ChamberPointSL3,
    pub lhs: f64,
    pub bound: f64,
    pub passed: bool,
}

/// `|φ(D(r,s,t)) − φ(D_{-t} k_0 D_{-t})| ≤ ε(e^{r+2t})` for the Gaussian witness.
pub fn check_lemma_drst(point: ChamberPointSL3, p: f64) -> Result<LemmaDrstCheck> {
    let point = ChamberPointSL3::new(point.r, point.s, point.t)?;
    if !(point.t < 0.0) {
        return Err(Error::Domain {
            name: "t",
            value: point.t,
            expected: "t < 0",
        });
    }
    let d = d_a_sl3(-point.t);
    let wall = d.mul(&k_delta(0.0)?)?.mul(&d)?;
    let wall_point = match chamber(&wall)? {
        ChamberPoint::Sl3(c) => c,
        ChamberPoint::Sp2(_) => unreachable!("SL3 element"),
    };
    let phi = TestMultiplier::gaussian();
    let lhs = (gaussian_phi(&d_rst(point.r, point.s, point.t)?)? - phi.eval(&wall)?).abs();
    let norm = phi.asserted_pcb_norm_bound.expect("Gaussian has a norm bound");
    let bound = norm * epsilon(EpsilonParams::new(p)?, (point.r + 2.0 * point.t).min(0.0).exp())?;
    Ok(LemmaDrstCheck {
        point,
        wall_point,
        lhs,
        bound,
        passed: lhs <= bound * (1.0 + 1e-12),
    })
}

/// `g_n = D(n · direction)` for `n = 0..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeSequence {
    pub group: GroupTag,
    pub direction: ChamberPoint,
    pub n_max: usize,
}

impl EscapeSequence {
    /// `D(2n, −n, −n)`.
    pub fn sl3_default(n_max: usize) -> Self {
        Self {
            group: GroupTag::Sl3,
            direction: ChamberPoint::Sl3(ChamberPointSL3 { r: 2.0, s: -1.0, t: -1.0 }),
            n_max,
        }
    }

    /// `D(2n, n)`.
    pub fn sp2_default(n_max: usize) -> Self {
        Self {
            group: GroupTag::Sp2,
            direction: ChamberPoint::Sp2(ChamberPointSp2 { beta: 2.0, gamma: 1.0 }),
            n_max,
        }
    }

    pub fn point(&self, n: usize) -> ChamberPoint {
        let x = n as f64;
        match self.direction {
            ChamberPoint::Sl3(d) => ChamberPoint::Sl3(ChamberPointSL3 { r: x * d.r, s: x * d.s, t: x * d.t }),
            ChamberPoint::Sp2(d) => ChamberPoint::Sp2(ChamberPointSp2 { beta: x * d.beta, gamma: x * d.gamma }),
        }
    }

    pub fn element(&self, n: usize) -> GroupElement {
        match self.point(n) {
            ChamberPoint::Sl3(c) => d_rst(c.r, c.s, c.t).expect("chamber point sums to zero"),
            ChamberPoint::Sp2(c) => d_beta_gamma(c.beta, c.gamma),
        }
    }

    fn validate(&self) -> Result<()> {
        let escapes = match self.direction {
            ChamberPoint::Sl3(d) => ChamberPointSL3::new(d.r, d.s, d.t).is_ok() && d.r > 0.0,
            ChamberPoint::Sp2(d) => ChamberPointSp2::new(d.beta, d.gamma).is_ok() && d.beta > 0.0,
        };
        if !escapes || self.direction.group() != self.group {
            return Err(Error::Domain {
                name: "direction",
                value: f64::NAN,
                expected: "nonzero chamber direction of the sequence's group",
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoRow {
    pub n: usize,
    pub norm: f64,
    pub constant: f64,
    pub bump: f64,
    pub gaussian: f64,
    /// Certified bound on `‖m_{g_{n-1}} − m_{g_n}‖`, from `n = 1` on.
    pub pair_bound: Option<f64>,
    pub gap: Option<f64>,
    pub gap_ok: Option<bool>,
    /// The certificate uses only asymptotic (non-small-region) steps.
    pub asymptotic: Option<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// Largest `b_{n+1}/b_n` over consecutive asymptotic bounds.
    pub max_ratio: f64,
    /// Per-step rate of the group's envelope along this ray.
    pub envelope_rate: f64,
    pub envelope_rate_ok: bool,
    /// `e^{-1/p}`.
    pub unit_rate: f64,
    pub unit_rate_ok: bool,
    /// Geometric bound on the sum of bounds after the last row.
    pub tail_sum_bound: f64,
    pub partial_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub group: GroupTag,
    pub p: f64,
    pub radius: f64,
    pub constants: ConstantsTable,
    pub rows: Vec<DemoRow>,
    pub tail: TailCheck,
}

pub const DEMO_CSV_HEADER: &str = "n,norm,constant,bump,gaussian,pair_bound,gap,gap_ok";

impl DemoReport {
    pub fn constant_ok(&self) -> bool {
        self.rows.iter().all(|r| r.constant == 1.0)
    }

    pub fn bump_ok(&self) -> bool {
        self.rows.iter().filter(|r| r.norm > self.radius).all(|r| r.bump == 0.0)
    }

    pub fn gaps_ok(&self) -> bool {
        self.rows.iter().all(|r| r.gap_ok != Some(false))
    }

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.17e}")).unwrap_or_default();
        let mut out = String::from(DEMO_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}\n",
                r.n,
                r.norm,
                r.constant,
                r.bump,
                r.gaussian,
                opt(r.pair_bound),
                opt(r.gap),
                r.gap_ok.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

/// Pairs `1`, the bump and the Gaussian against `m_{g_n}` along the sequence,
/// with a certificate bound for each consecutive pair.
pub fn obstruction_demo(
    seq: &EscapeSequence,
    radius: f64,
    p: f64,
    sp2_constants: Option<&ConstantsTable>,
) -> Result<DemoReport> {
    seq.validate()?;
    let one = TestMultiplier::constant(1.0);
    let bump = TestMultiplier::bump(radius)?;
    let gauss = TestMultiplier::gaussian();
    let constants = match seq.group {
        GroupTag::Sl3 => crate::certify::constants_sl3(p)?,
        _ => match sp2_constants {
            Some(t) => *t,
            None => constants_sp2_default(p)?,
        },
    };
    let mut rows: Vec<DemoRow> = Vec::with_capacity(seq.n_max + 1);
    for n in 0..=seq.n_max {
        let g = seq.element(n);
        let gaussian = m_pairing(&g, &gauss)?.value;
        let (mut pair_bound, mut gap, mut gap_ok, mut asymptotic) = (None, None, None, None);
        if n > 0 {
            let cert = match (seq.point(n - 1), seq.point(n)) {
                (ChamberPoint::Sl3(a), ChamberPoint::Sl3(b)) => plan_path_sl3(a, b, p)?,
                (ChamberPoint::Sp2(a), ChamberPoint::Sp2(b)) => plan_path_sp2(a, b, &constants)?,
                _ => unreachable!("one group per sequence"),
            };
            let d = (gaussian - rows[n - 1].gaussian).abs();
            pair_bound = Some(cert.total);
            gap = Some(d);
            gap_ok = Some(d <= cert.total * (1.0 + 1e-12));
            asymptotic = Some(
                !cert
                    .steps
                    .iter()
                    .any(|s| matches!(s.tag, StepTag::SmallT | StepTag::Sp2SmallRegion)),
            );
        }
        rows.push(DemoRow {
            n,
            norm: operator_norm(&g),
            constant: m_pairing(&g, &one)?.value,
            bump: m_pairing(&g, &bump)?.value,
            gaussian,
            pair_bound,
            gap,
            gap_ok,
            asymptotic,
        });
    }
    let tail = tail_check(seq, &rows, p);
    Ok(DemoReport { group: seq.group, p, radius, constants, rows, tail })
}

fn tail_check(seq: &EscapeSequence, rows: &[DemoRow], p: f64) -> TailCheck {
    let tail: Vec<f64> = rows
        .iter()
        .filter(|r| r.asymptotic == Some(true))
        .filter_map(|r| r.pair_bound)
        .collect();
    let max_ratio = tail
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    // SL3 envelope e^{γ3/p}; Sp2 envelope e^{-β/(32p)}.
    let envelope_rate = match seq.direction {
        ChamberPoint::Sl3(d) => (d.t / p).exp(),
        ChamberPoint::Sp2(d) => (-d.beta / (32.0 * p)).exp(),
    };
    let unit_rate = (-1.0 / p).exp();
    let partial_sum = rows.iter().filter_map(|r| r.pair_bound).sum();
    let last = tail.last().copied().unwrap_or(f64::NAN);
    let tail_sum_bound = if max_ratio < 1.0 { last * max_ratio / (1.0 - max_ratio) } else { f64::INFINITY };
    let slack = 1.0 + 1e-12;
    TailCheck {
        max_ratio,
        envelope_rate,
        envelope_rate_ok: tail.len() >= 2 && max_ratio <= envelope_rate * slack,
        unit_rate,
        unit_rate_ok: tail.len() >= 2 && max_ratio <= unit_rate * slack,
        tail_sum_bound,
        partial_sum,
    }
}

fn product(factors: &[&GroupElement]) -> GroupElement {
    factors[1..]
        .iter()
        .fold(factors[0].clone(), |acc, f| acc.mul(f).expect("factors share an ambient group"))
}

/// Radius of the ball `B_2 = {‖h‖ < 2}`.
const BALL_RADIUS: f64 = 2.0;

/// Chamber point of a Haar-distributed `h ∈ B_2`, drawn by rejection from the
/// polar density `∏ sinh(α(a))` over the positive roots.
fn sample_ball_chamber(tag: GroupTag, h: &mut HaarSampler) -> ChamberPoint {
    let ln_r = BALL_RADIUS.ln();
    let rng = h.rng();
    match tag {
        GroupTag::Sl3 => {
            // x = a1 − a2, y = a2 − a3 with a1 = (2x + y)/3 < ln R.
            let (xm, ym) = (1.5 * ln_r, 3.0 * ln_r);
            let bound = xm.sinh() * ym.sinh() * (xm + ym).sinh();
            loop {
                let x: f64 = rng.random::<f64>() * xm;
                let y: f64 = rng.random::<f64>() * ym;
                if 2.0 * x + y >= 3.0 * ln_r {
                    continue;
                }
                if rng.random::<f64>() * bound < x.sinh() * y.sinh() * (x + y).sinh() {
                    return ChamberPoint::Sl3(ChamberPointSL3 {
                        r: (2.0 * x + y) / 3.0,
                        s: (y - x) / 3.0,
                        t: -(x + 2.0 * y) / 3.0,
                    });
                }
            }
        }
        _ => {
            let bound = ln_r.sinh() * (2.0 * ln_r).sinh().powi(3);
            loop {
                let b: f64 = rng.random::<f64>() * ln_r;
                let c: f64 = rng.random::<f64>() * ln_r;
                if c > b {
                    continue;
                }
                let dens = (b - c).sinh() * (b + c).sinh() * (2.0 * b).sinh() * (2.0 * c).sinh();
                if rng.random::<f64>() * bound < dens {
                    return ChamberPoint::Sp2(ChamberPointSp2 { beta: b, gamma: c });
                }
            }
        }
    }
}

/// `⟨m̃_g, φ⟩` with `m̃_g = ν_K ∗ χ_{B_2} ∗ δ_g ∗ ν_K`, `χ_{B_2}` normalized to mass one.
pub fn m_tilde_pairing(g: &GroupElement, phi: &TestMultiplier, n_samples: usize, seed: u64) -> Result<PairingResult> {
    if n_samples == 0 {
        return Err(Error::Domain {
            name: "samples",
            value: 0.0,
            expected: "at least one sample",
        });
    }
    let tag = g.tag().ambient();
    let g = g.clone().into_ambient();
    let failed = std::sync::atomic::AtomicBool::new(false);
    let out = monte_carlo(n_samples, seed, |h| {
        let a = sample_ball_chamber(tag, h).diag();
        let k = h.compact(tag);
        let x = product(&[&a, &k, &g]);
        phi.eval(&x).unwrap_or_else(|_| {
            failed.store(true, std::sync::atomic::Ordering::Relaxed);
            f64::NAN
        })
    });
    if failed.into_inner() {
        return Err(Error::Certificate("multiplier evaluation failed inside the ball average".into()));
    }
    Ok(out)
}

/// Same pairing for SL(3), sampling `h` instead by rejection from the entry
/// box `[-2, 2]^9`: `X` uniform with `det X = λ^3`, `λ ∈ [0.8, 1]`, weighted by
/// `det(X)^{-3}` (Haar on GL(3) is `dX / |det X|^3`), and `h = X / λ`.
pub fn m_tilde_pairing_box(g: &GroupElement, phi: &TestMultiplier, n_draws: usize, seed: u64) -> Result<PairingResult> {
    if g.tag().ambient() != GroupTag::Sl3 {
        return Err(Error::WrongGroup {
            expected: "SL(3,R)",
            actual: g.tag(),
        });
    }
    let g = g.clone().into_ambient();
    let (lam_lo, lam_hi) = (0.8f64, 1.0f64);
    let mut h = HaarSampler::new(seed);
    let (mut sw, mut swf, mut samples) = (0.0, 0.0, Vec::new());
    for _ in 0..n_draws {
        let rng = h.rng();
        let x = DMatrix::from_fn(3, 3, |_, _| BALL_RADIUS * (2.0 * rng.random::<f64>() - 1.0));
        let det = x.determinant();
        if !(det > lam_lo.powi(3) && det < lam_hi.powi(3)) {
            continue;
        }
        let lam = det.cbrt();
        let m = x / lam;
        if m.clone().svd(false, false).singular_values.max() >= BALL_RADIUS {
            continue;
        }
        let hx = GroupElement::with_tolerance(GroupTag::Sl3, m, 1e-9)?;
        let f = phi.eval(&product(&[&hx, &g]))?;
        let w = det.powi(-3);
        sw += w;
        swf += w * f;
        samples.push((w, f));
    }
    if samples.is_empty() {
        return Err(Error::NoConvergence {
            what: "box rejection sampler",
            iterations: n_draws,
            residual: f64::NAN,
        });
    }
    let mean = swf / sw;
    let var: f64 = samples.iter().map(|(w, f)| (w * (f - mean)).powi(2)).sum();
    Ok(PairingResult { value: mean, mc_error_estimate: var.sqrt() / sw })
}
